#pragma once

// Runs the completion engines side by side under a deadline, removes lexical
// and semantic duplicates, and weaves the survivors by grade and type.

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "semc/errors.hpp"
#include "semc/semantics.hpp"

namespace semc {

struct Engine {
  std::string name;
  std::function<std::vector<Completion>(std::string_view prefix, std::size_t d)> run;
};

struct CoordinatorConfig {
  std::vector<std::string> algorithms{"mpc", "atomic", "template"};
  std::size_t d = 10;
  double budget_ms = 50;
  Grade grade_floor = Grade::Low;          // lower grades are dropped when anything at or above it exists
  std::vector<std::string> fallback_only;  // consulted only when every other engine came back empty

  void validate() const {
    if (algorithms.empty()) throw ConfigError("coordinator: no algorithms enabled");
    if (d == 0) throw ConfigError("coordinator: d must be positive");
    if (!(budget_ms > 0)) throw ConfigError("coordinator: budget_ms must be positive");
  }
};

struct Coordinated {
  std::vector<Completion> completions;
  std::vector<std::string> overran;  // engines cut off by the budget (or that threw)
};

/// Order inside a (grade, type) group.
inline bool better_in_group(const Completion& a, const Completion& b) {
  if (a.score != b.score) return a.score > b.score;
  int pa = source_priority(a.source), pb = source_priority(b.source);
  if (pa != pb) return pa < pb;
  return a.completion < b.completion;
}

/// Removes later items whose canonical formula or normalized string was already
/// kept. Items are visited by grade, then by their position in `lists`.
inline std::vector<Completion> dedup(const std::vector<std::vector<Completion>>& lists) {
  std::vector<const Completion*> order;
  for (const auto& l : lists)
    for (const auto& c : l) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->grade > b->grade; });
  std::set<std::string> formulas, strings;
  std::vector<Completion> out;
  for (auto* c : order) {
    auto f = canonical_key(c->interpretation);
    auto s = text::normalize(c->completion);
    if (formulas.count(f) || strings.count(s)) continue;
    formulas.insert(std::move(f));
    strings.insert(std::move(s));
    out.push_back(*c);
  }
  return out;
}

/// Syntactic extension of the prefix with a non-empty interpretation.
inline bool sound(std::string_view prefix, const Completion& c) {
  return !atoms_of(c.interpretation).empty() && is_syntactic_extension(prefix, c.completion);
}

inline std::vector<Completion> apply_grade_floor(std::vector<Completion> items, Grade floor) {
  bool above = std::any_of(items.begin(), items.end(), [&](const Completion& c) { return c.grade >= floor; });
  if (!above) return items;
  std::erase_if(items, [&](const Completion& c) { return c.grade < floor; });
  return items;
}

/// Grade tiers high to low; inside a tier, type groups dealt round-robin in
/// the order of their best members.
inline std::vector<Completion> weave(std::vector<Completion> items, std::size_t d) {
  std::vector<Completion> out;
  for (Grade g : {Grade::High, Grade::Medium, Grade::Low}) {
    std::map<DiversificationType, std::vector<Completion>> groups;
    for (auto& c : items)
      if (c.grade == g) groups[c.dtype].push_back(c);
    std::vector<std::vector<Completion>> tier;
    for (auto& [t, v] : groups) {
      std::stable_sort(v.begin(), v.end(), better_in_group);
      tier.push_back(std::move(v));
    }
    std::stable_sort(tier.begin(), tier.end(),
                     [](const auto& a, const auto& b) { return better_in_group(a.front(), b.front()); });
    for (std::size_t round = 0;; ++round) {
      bool any = false;
      for (auto& grp : tier) {
        if (round >= grp.size()) continue;
        any = true;
        if (out.size() >= d) return out;
        out.push_back(grp[round]);
      }
      if (!any) break;
    }
  }
  if (out.size() > d) out.resize(d);
  return out;
}

class Coordinator {
 public:
  Coordinator(std::vector<Engine> engines, CoordinatorConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (const auto& name : cfg_.algorithms) {
      auto it = std::find_if(engines.begin(), engines.end(), [&](const Engine& e) { return e.name == name; });
      if (it == engines.end()) throw ConfigError("coordinator: unknown algorithm '" + name + "'");
      bool fallback = std::find(cfg_.fallback_only.begin(), cfg_.fallback_only.end(), name) != cfg_.fallback_only.end();
      (fallback ? fallback_ : primary_).push_back(*it);
    }
    if (primary_.empty()) std::swap(primary_, fallback_);
    std::size_t workers = std::max<std::size_t>(2, primary_.size() + fallback_.size());
    for (std::size_t i = 0; i < workers; ++i) workers_.emplace_back([this] { work(); });
  }

  ~Coordinator() {
    {
      std::lock_guard lk(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  Coordinator(const Coordinator&) = delete;
  Coordinator& operator=(const Coordinator&) = delete;

  const CoordinatorConfig& config() const { return cfg_; }

  Coordinated run(std::string_view prefix, std::optional<std::size_t> d = std::nullopt) {
    std::size_t want = d.value_or(cfg_.d);
    if (want == 0) return {};
    Coordinated out;
    auto keep_sound = [&](std::vector<std::vector<Completion>> lists) {
      for (auto& l : lists) std::erase_if(l, [&](const Completion& c) { return !sound(prefix, c); });
      return lists;
    };
    auto lists = keep_sound(gather(primary_, prefix, want, out.overran));
    bool empty = std::all_of(lists.begin(), lists.end(), [](const auto& l) { return l.empty(); });
    if (empty && !fallback_.empty()) lists = keep_sound(gather(fallback_, prefix, want, out.overran));
    out.completions = weave(apply_grade_floor(dedup(lists), cfg_.grade_floor), want);
    return out;
  }

  std::vector<Completion> complete(std::string_view prefix, std::optional<std::size_t> d = std::nullopt) {
    return run(prefix, d).completions;
  }

 private:
  struct Call {
    std::mutex mu;
    std::condition_variable cv;
    std::vector<std::optional<std::vector<Completion>>> results;
    std::vector<bool> failed;
    std::size_t pending = 0;
  };

  std::vector<std::vector<Completion>> gather(const std::vector<Engine>& engines, std::string_view prefix,
                                              std::size_t d, std::vector<std::string>& overran) {
    auto call = std::make_shared<Call>();
    call->results.resize(engines.size());
    call->failed.assign(engines.size(), false);
    call->pending = engines.size();
    auto text = std::make_shared<std::string>(prefix);
    {
      std::lock_guard lk(mu_);
      for (std::size_t i = 0; i < engines.size(); ++i) {
        tasks_.push_back([call, text, i, d, run = engines[i].run] {
          std::optional<std::vector<Completion>> r;
          bool failed = false;
          try {
            r = run(*text, d);
          } catch (...) {
            failed = true;
          }
          std::lock_guard lk(call->mu);
          call->results[i] = std::move(r);
          call->failed[i] = failed;
          --call->pending;
          call->cv.notify_all();
        });
      }
    }
    cv_.notify_all();
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double, std::milli>(cfg_.budget_ms));
    std::unique_lock lk(call->mu);
    call->cv.wait_until(lk, deadline, [&] { return call->pending == 0; });
    std::vector<std::vector<Completion>> lists(engines.size());
    for (std::size_t i = 0; i < engines.size(); ++i) {
      if (call->results[i] && !call->failed[i])
        lists[i] = std::move(*call->results[i]);
      else
        overran.push_back(engines[i].name);
      call->results[i].reset();
    }
    // late results land in `call` and are dropped with it
    return lists;
  }

  void work() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stopping_ || !tasks_.empty(); });
        if (tasks_.empty()) return;
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
      task();
    }
  }

  CoordinatorConfig cfg_;
  std::vector<Engine> primary_, fallback_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace semc
