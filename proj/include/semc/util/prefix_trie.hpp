#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semc::util {

/// Character trie with flattened storage. Every node keeps the ids of all keys
/// below it in rank order, so a top-k prefix query is a slice of that list.
template <typename Id = std::uint32_t>
class PrefixTrie {
 public:
  using NodeId = std::uint32_t;

  PrefixTrie() { nodes_.push_back(Node{}); }

  /// `keys[i]` is the key of item i. `ranked` lists item ids best-first; items
  /// absent from it are never returned as candidates (but still terminate).
  static PrefixTrie build(const std::vector<std::string>& keys, const std::vector<Id>& ranked) {
    struct Tmp {
      std::map<char, NodeId> kids;
      std::vector<Id> cands;
      std::vector<Id> terms;
    };
    std::vector<Tmp> tmp(1);
    std::vector<NodeId> end_node(keys.size(), 0);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      NodeId cur = 0;
      for (char c : keys[i]) {
        auto it = tmp[cur].kids.find(c);
        if (it == tmp[cur].kids.end()) {
          auto next = static_cast<NodeId>(tmp.size());
          tmp[cur].kids.emplace(c, next);
          tmp.emplace_back();
          cur = next;
        } else {
          cur = it->second;
        }
      }
      end_node[i] = cur;
    }
    for (Id id : ranked) {
      NodeId cur = 0;
      tmp[cur].cands.push_back(id);
      for (char c : keys[id]) {
        cur = tmp[cur].kids.at(c);
        tmp[cur].cands.push_back(id);
      }
      tmp[cur].terms.push_back(id);
    }
    // terminals are also recorded for unranked items, after the ranked ones
    std::vector<bool> seen(keys.size(), false);
    for (Id id : ranked) seen[id] = true;
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (!seen[i]) tmp[end_node[i]].terms.push_back(static_cast<Id>(i));

    PrefixTrie t;
    t.nodes_.assign(tmp.size(), Node{});
    for (std::size_t n = 0; n < tmp.size(); ++n) {
      Node& node = t.nodes_[n];
      node.edge_begin = static_cast<std::uint32_t>(t.edges_.size());
      for (auto [c, kid] : tmp[n].kids) t.edges_.push_back(Edge{c, kid});
      node.edge_end = static_cast<std::uint32_t>(t.edges_.size());
      node.cand_begin = static_cast<std::uint32_t>(t.cands_.size());
      t.cands_.insert(t.cands_.end(), tmp[n].cands.begin(), tmp[n].cands.end());
      node.cand_end = static_cast<std::uint32_t>(t.cands_.size());
      node.term_begin = static_cast<std::uint32_t>(t.terms_.size());
      t.terms_.insert(t.terms_.end(), tmp[n].terms.begin(), tmp[n].terms.end());
      node.term_end = static_cast<std::uint32_t>(t.terms_.size());
    }
    return t;
  }

  NodeId root() const { return 0; }

  std::optional<NodeId> child(NodeId n, char c) const {
    const Node& node = nodes_[n];
    auto first = edges_.begin() + node.edge_begin;
    auto last = edges_.begin() + node.edge_end;
    auto it = std::lower_bound(first, last, c, [](const Edge& e, char ch) { return e.c < ch; });
    if (it == last || it->c != c) return std::nullopt;
    return it->to;
  }

  std::optional<NodeId> descend(NodeId n, std::string_view s) const {
    for (char c : s) {
      auto next = child(n, c);
      if (!next) return std::nullopt;
      n = *next;
    }
    return n;
  }

  std::optional<NodeId> find(std::string_view prefix) const { return descend(root(), prefix); }

  std::span<const Id> candidates(NodeId n) const {
    const Node& node = nodes_[n];
    return {cands_.data() + node.cand_begin, node.cand_end - node.cand_begin};
  }

  std::span<const Id> terminals(NodeId n) const {
    const Node& node = nodes_[n];
    return {terms_.data() + node.term_begin, node.term_end - node.term_begin};
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::uint32_t edge_begin = 0, edge_end = 0;
    std::uint32_t cand_begin = 0, cand_end = 0;
    std::uint32_t term_begin = 0, term_end = 0;
  };
  struct Edge {
    char c;
    NodeId to;
  };

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<Id> cands_;
  std::vector<Id> terms_;
};

}  // namespace semc::util
