#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace rigfit {

template <typename T>
using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Mat3 = Eigen::Matrix<T, 3, 3>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using Mat3X = Eigen::Matrix<T, 3, Eigen::Dynamic>;
template <typename T>
using Mat2X = Eigen::Matrix<T, 2, Eigen::Dynamic>;

// Error taxonomy. Everything derives from Error so callers can catch broadly.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Vector or matrix sizes disagree with the rig or with each other.
struct DimensionError : Error {
  using Error::Error;
};
/// Out-of-domain argument (non-positive scale, bad FOV, unknown subtree, ...).
struct InvalidArgument : Error {
  using Error::Error;
};
/// Point behind a camera, degenerate triangulation or alignment input.
struct GeometryError : Error {
  using Error::Error;
};
/// Not enough visible constraints to fit.
struct UnderConstrainedError : Error {
  using Error::Error;
};
/// Non-finite values appeared during evaluation or optimization.
struct NumericError : Error {
  using Error::Error;
};
/// File or payload does not conform to its schema. `field` is a JSON path.
struct SchemaError : Error {
  SchemaError(const std::string& field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field(field) {}
  std::string field;
};

}  // namespace rigfit
