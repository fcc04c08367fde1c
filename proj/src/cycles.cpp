#include "hsgt/cycles.hpp"

#include <algorithm>

namespace hsgt::graph {

namespace {

// Johnson's circuit search restricted to the subgraph induced by nodes >= start.
class CircuitSearch {
 public:
  CircuitSearch(const Adjacency& adj, const std::function<bool(const std::vector<std::size_t>&)>& visit)
      : adj_(adj), visit_(visit), blocked_(adj.size(), false), blocked_by_(adj.size()) {}

  std::size_t run() {
    const std::size_t n = adj_.size();
    for (start_ = 0; start_ < n && !stopped_; ++start_) {
      std::fill(blocked_.begin(), blocked_.end(), false);
      for (auto& b : blocked_by_) b.clear();
      circuit(start_);
    }
    return count_;
  }

 private:
  void unblock(std::size_t u) {
    blocked_[u] = false;
    while (!blocked_by_[u].empty()) {
      const std::size_t w = blocked_by_[u].back();
      blocked_by_[u].pop_back();
      if (blocked_[w]) unblock(w);
    }
  }

  bool circuit(std::size_t v) {
    bool found = false;
    path_.push_back(v);
    blocked_[v] = true;
    for (std::size_t w : adj_[v]) {
      if (stopped_) break;
      if (w < start_) continue;
      if (w == start_) {
        ++count_;
        if (!visit_(path_)) stopped_ = true;
        found = true;
      } else if (!blocked_[w] && circuit(w)) {
        found = true;
      }
    }
    if (found) {
      unblock(v);
    } else {
      for (std::size_t w : adj_[v]) {
        if (w < start_) continue;
        auto& list = blocked_by_[w];
        if (std::find(list.begin(), list.end(), v) == list.end()) list.push_back(v);
      }
    }
    path_.pop_back();
    return found;
  }

  const Adjacency& adj_;
  const std::function<bool(const std::vector<std::size_t>&)>& visit_;
  std::vector<bool> blocked_;
  std::vector<std::vector<std::size_t>> blocked_by_;
  std::vector<std::size_t> path_;
  std::size_t start_ = 0;
  std::size_t count_ = 0;
  bool stopped_ = false;
};

}  // namespace

std::size_t for_each_simple_cycle(const Adjacency& adjacency,
                                  const std::function<bool(const std::vector<std::size_t>&)>& visit) {
  return CircuitSearch(adjacency, visit).run();
}

}  // namespace hsgt::graph
