#include "rigfit/param_layout.hpp"

#include "rigfit/types.hpp"

namespace rigfit {

int ParamLayout::add_block(std::string name, int length) {
  if (length < 0) throw InvalidArgument("negative block length for " + name);
  for (const auto& b : blocks_) {
    if (b.name == name) throw InvalidArgument("duplicate parameter block " + name);
  }
  blocks_.push_back(Block{std::move(name), size_, length, false});
  block_of_index_.insert(block_of_index_.end(), length, num_blocks() - 1);
  size_ += length;
  return num_blocks() - 1;
}

int ParamLayout::find(const std::string& name) const {
  for (int i = 0; i < num_blocks(); ++i) {
    if (blocks_[i].name == name) return i;
  }
  throw InvalidArgument("unknown parameter block " + name);
}

bool ParamLayout::contains(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return true;
  }
  return false;
}

void ParamLayout::set_frozen(int block, bool frozen) { blocks_.at(block).frozen = frozen; }

void ParamLayout::set_all_frozen(bool frozen) {
  for (auto& b : blocks_) b.frozen = frozen;
}

bool ParamLayout::is_frozen_index(int index) const {
  return blocks_[block_of_index_.at(index)].frozen;
}

std::vector<int> ParamLayout::active_indices() const {
  std::vector<int> out;
  for (const auto& b : blocks_) {
    if (b.frozen) continue;
    for (int i = 0; i < b.length; ++i) out.push_back(b.offset + i);
  }
  return out;
}

}  // namespace rigfit
