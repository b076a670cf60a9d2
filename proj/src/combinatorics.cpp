#include "moran/combinatorics.hpp"

#include <algorithm>
#include <cctype>

namespace moran {

PartialPartition::PartialPartition(std::vector<SiteSet> blocks) : blocks_(std::move(blocks)) {
  std::sort(blocks_.begin(), blocks_.end());
  for (SiteSet b : blocks_) {
    if (b.empty()) throw ModelError("partial partition blocks must be nonempty");
    if (!b.disjoint(support_)) throw ModelError("partial partition blocks must be disjoint");
    support_ = support_ | b;
  }
}

std::string PartialPartition::to_string() const {
  if (blocks_.empty()) return "{}";
  std::string s;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (i) s += "|";
    s += blocks_[i].to_string();
  }
  return s;
}

PartialPartition PartialPartition::parse(const std::string& text) {
  std::vector<SiteSet> blocks;
  std::size_t pos = 0;
  auto fail = [&] { throw ModelError("cannot parse partial partition \"" + text + "\""); };
  if (text == "{}") return PartialPartition();
  while (pos < text.size()) {
    if (text[pos] != '{') fail();
    const auto close = text.find('}', pos);
    if (close == std::string::npos) fail();
    std::vector<int> sites;
    std::size_t i = pos + 1;
    while (i < close) {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(text.substr(i, close - i), &used);
      } catch (const std::exception&) {
        fail();
      }
      sites.push_back(v);
      i += used;
      if (i < close) {
        if (text[i] != ',') fail();
        ++i;
      }
    }
    if (sites.empty()) fail();
    blocks.push_back(SiteSet::of(sites));
    pos = close + 1;
    if (pos < text.size()) {
      if (text[pos] != '|') fail();
      ++pos;
      if (pos == text.size()) fail();
    }
  }
  return PartialPartition(std::move(blocks));
}

bool disrupts(SiteSet g, std::span<const SiteSet> blocks) {
  for (SiteSet a : blocks) {
    const SiteSet cut = g & a;
    if (cut.empty() || cut == a) return false;
  }
  return true;
}

SiteSet union_of(std::span<const SiteSet> blocks, std::uint32_t which) {
  SiteSet u;
  for (std::size_t l = 0; l < blocks.size(); ++l)
    if ((which >> l) & 1u) u = u | blocks[l];
  return u;
}

std::vector<SiteSet> flip_orbit(SiteSet g, std::span<const SiteSet> j_blocks) {
  const auto count = std::uint32_t{1} << j_blocks.size();
  std::vector<SiteSet> out;
  out.reserve(count);
  for (std::uint32_t sel = 0; sel < count; ++sel) out.push_back(g ^ union_of(j_blocks, sel));
  return out;
}

namespace {

void extend(const std::vector<int>& sites, std::size_t next, std::vector<SiteSet>& blocks,
            std::vector<PartialPartition>& out) {
  if (next == sites.size()) {
    out.emplace_back(blocks);
    return;
  }
  const SiteSet s = SiteSet::of({sites[next]});
  extend(sites, next + 1, blocks, out);  // site left out
  for (auto& b : blocks) {
    const SiteSet before = b;
    b = b | s;
    extend(sites, next + 1, blocks, out);
    b = before;
  }
  blocks.push_back(s);
  extend(sites, next + 1, blocks, out);
  blocks.pop_back();
}

}  // namespace

std::vector<PartialPartition> enumerate_partial_partitions(SiteSet sites) {
  if (sites.size() > 10)
    throw ModelError("partial partition enumeration is capped at 10 sites, got " +
                     std::to_string(sites.size()));
  std::vector<PartialPartition> out;
  std::vector<SiteSet> blocks;
  extend(sites.sites(), 0, blocks, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<TripleIJK> enumerate_triples(int m) {
  if (m < 1 || m > 16) throw ModelError("block count must be in 1..16");
  std::vector<TripleIJK> out;
  const std::uint32_t all = (std::uint32_t{1} << m) - 1;
  std::uint64_t total = 1;
  for (int l = 0; l < m; ++l) total *= 3;
  for (std::uint64_t code = 0; code < total; ++code) {
    TripleIJK t;
    std::uint64_t c = code;
    for (int l = 0; l < m; ++l, c /= 3) {
      const std::uint32_t bit = std::uint32_t{1} << l;
      switch (c % 3) {
        case 0: t.i |= bit; break;
        case 1: t.j |= bit; break;
        default: t.k |= bit; break;
      }
    }
    if (t.i != all) out.push_back(t);
  }
  return out;
}

}  // namespace moran
