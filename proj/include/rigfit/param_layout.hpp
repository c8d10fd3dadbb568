#pragma once

#include <string>
#include <vector>

namespace rigfit {

/// Named contiguous blocks over a flat parameter vector. Blocks are appended
/// in order, so they never overlap and always cover [0, size()).
class ParamLayout {
 public:
  struct Block {
    std::string name;
    int offset = 0;
    int length = 0;
    bool frozen = false;
  };

  int add_block(std::string name, int length);

  int size() const { return size_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const Block& block(int i) const { return blocks_.at(i); }
  const std::vector<Block>& blocks() const { return blocks_; }

  /// Index of the named block; throws InvalidArgument when absent.
  int find(const std::string& name) const;
  bool contains(const std::string& name) const;

  void set_frozen(int block, bool frozen);
  void set_frozen(const std::string& name, bool frozen) { set_frozen(find(name), frozen); }
  /// Freeze or thaw every block.
  void set_all_frozen(bool frozen);
  bool is_frozen_index(int index) const;

  /// Flat indices of all non-frozen parameters, ascending.
  std::vector<int> active_indices() const;

 private:
  std::vector<Block> blocks_;
  std::vector<int> block_of_index_;
  int size_ = 0;
};

}  // namespace rigfit
