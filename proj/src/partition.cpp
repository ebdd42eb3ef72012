#include "brmax/partition.hpp"

#include <algorithm>
#include <charconv>

#include "brmax/errors.hpp"

namespace brmax {

SetPartition::SetPartition(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  for (auto& b : blocks_) {
    if (b.empty()) throw ValidationError("SetPartition: empty block");
    std::sort(b.begin(), b.end());
    ground_.insert(ground_.end(), b.begin(), b.end());
  }
  std::sort(blocks_.begin(), blocks_.end(),
            [](const Block& a, const Block& b) { return a.front() < b.front(); });
  std::sort(ground_.begin(), ground_.end());
  if (std::adjacent_find(ground_.begin(), ground_.end()) != ground_.end())
    throw ValidationError("SetPartition: blocks overlap");
}

SetPartition SetPartition::singletons(const std::vector<int>& ground) {
  std::vector<Block> blocks;
  blocks.reserve(ground.size());
  for (int g : ground) blocks.push_back({g});
  return SetPartition(std::move(blocks));
}

SetPartition SetPartition::one_block(const std::vector<int>& ground) {
  if (ground.empty()) return {};
  return SetPartition({ground});
}

int SetPartition::block_of(int index) const {
  for (std::size_t k = 0; k < blocks_.size(); ++k)
    if (std::binary_search(blocks_[k].begin(), blocks_[k].end(), index)) return static_cast<int>(k);
  return -1;
}

std::string SetPartition::to_string() const {
  std::string out;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    if (k) out += '|';
    for (std::size_t i = 0; i < blocks_[k].size(); ++i) {
      if (i) out += ',';
      out += std::to_string(blocks_[k][i] + 1);
    }
  }
  return out;
}

SetPartition SetPartition::parse(std::string_view text) {
  std::vector<Block> blocks;
  if (text.empty()) return {};
  Block current;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (p < end) {
    int v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || v < 1)
      throw ValidationError("SetPartition::parse: bad label in '" + std::string(text) + "'");
    current.push_back(v - 1);
    p = next;
    if (p == end || *p == '|') {
      blocks.push_back(std::move(current));
      current.clear();
    } else if (*p != ',') {
      throw ValidationError("SetPartition::parse: unexpected character in '" + std::string(text) + "'");
    }
    if (p < end) ++p;
  }
  return SetPartition(std::move(blocks));
}

unsigned long long bell_number(int n) {
  if (n < 0 || n > 25) throw DimensionTooLarge("bell_number: n out of range");
  // Bell triangle.
  std::vector<unsigned long long> row{1};
  for (int i = 0; i < n; ++i) {
    std::vector<unsigned long long> next{row.back()};
    for (auto v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.front();
}

std::vector<SetPartition> enumerate_partitions(const std::vector<int>& ground) {
  const int n = static_cast<int>(ground.size());
  if (n > 10) throw DimensionTooLarge("enumerate_partitions: more than 10 elements");
  std::vector<SetPartition> out;
  if (n == 0) {
    out.emplace_back();
    return out;
  }
  out.reserve(bell_number(n));
  // Restricted growth strings a[0]=0, a[i] ≤ 1 + max(a[0..i-1]).
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  std::vector<int> mx(static_cast<std::size_t>(n), 0);
  while (true) {
    std::vector<SetPartition::Block> blocks(static_cast<std::size_t>(mx.back() + 1));
    for (int i = 0; i < n; ++i) blocks[static_cast<std::size_t>(a[i])].push_back(ground[i]);
    out.emplace_back(std::move(blocks));
    int i = n - 1;
    while (i > 0 && a[i] == mx[i - 1] + 1) --i;
    if (i == 0) break;
    ++a[i];
    mx[i] = std::max(mx[i - 1], a[i]);
    for (int k = i + 1; k < n; ++k) {
      a[k] = 0;
      mx[k] = mx[i];
    }
  }
  return out;
}

double rand_index(const SetPartition& a, const SetPartition& b) {
  if (a.ground() != b.ground()) throw GroundMismatch("rand_index: different ground sets");
  const auto& g = a.ground();
  const std::size_t n = g.size();
  if (n < 2) return 1.0;
  std::vector<int> la(n), lb(n);
  for (std::size_t i = 0; i < n; ++i) {
    la[i] = a.block_of(g[i]);
    lb[i] = b.block_of(g[i]);
  }
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if ((la[i] == la[j]) == (lb[i] == lb[j])) ++agree;
  return static_cast<double>(agree) / static_cast<double>(n * (n - 1) / 2);
}

}  // namespace brmax
