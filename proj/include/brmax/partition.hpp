#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace brmax {

/// A partition of a finite set of (0-based) indices into nonempty blocks.
///
/// Always held in canonical form: each block sorted ascending, blocks ordered
/// by their smallest element. Two partitions are equal iff their canonical
/// forms are equal.
class SetPartition {
 public:
  using Block = std::vector<int>;

  SetPartition() = default;
  /// Throws ValidationError on empty or overlapping blocks.
  explicit SetPartition(std::vector<Block> blocks);

  static SetPartition singletons(const std::vector<int>& ground);
  static SetPartition one_block(const std::vector<int>& ground);

  [[nodiscard]] const std::vector<Block>& blocks() const { return blocks_; }
  [[nodiscard]] const std::vector<int>& ground() const { return ground_; }
  [[nodiscard]] std::size_t num_blocks() const { return blocks_.size(); }
  [[nodiscard]] std::size_t ground_size() const { return ground_.size(); }
  /// Position of the block containing `index`, or -1.
  [[nodiscard]] int block_of(int index) const;

  /// Text form with 1-based labels, e.g. "1,3|2|4,5".
  [[nodiscard]] std::string to_string() const;
  static SetPartition parse(std::string_view text);

  friend bool operator==(const SetPartition&, const SetPartition&) = default;

 private:
  std::vector<Block> blocks_;
  std::vector<int> ground_;
};

/// Bell number B(n) for n ≤ 25.
unsigned long long bell_number(int n);

/// All partitions of `ground` (|ground| ≤ 10), canonical, in restricted
/// growth string order. Throws DimensionTooLarge.
std::vector<SetPartition> enumerate_partitions(const std::vector<int>& ground);

/// Fraction of index pairs on which the two partitions agree (together or
/// apart). Throws GroundMismatch. Returns 1 for ground sets of size < 2.
double rand_index(const SetPartition& a, const SetPartition& b);

}  // namespace brmax
