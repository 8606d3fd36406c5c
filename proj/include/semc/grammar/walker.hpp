#pragma once

// Backtracking interpreter over a Grammar in continuation-passing style.
// Every construct receives the continuation of the rest of the path; state
// changes are made before the call and undone after it, so one walker serves
// all alternatives without copying.

#include <charconv>
#include <iterator>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semc/grammar/ast.hpp"
#include "semc/grammar/values.hpp"
#include "semc/util/function_ref.hpp"

namespace semc::grammar {

enum class Mode {
  Parse,      // all tokens complete; the root must consume everything
  Decompose,  // all tokens complete; record every point where the root can end
  Enumerate,  // last token may be unfinished; extend to the next mark
  Analyze,    // last token may be unfinished; succeed once input is consumed
  Sample,     // no input; random walk that generates a sentence
};

struct WalkLimits {
  int max_depth = 16;                 // nested production references
  std::size_t step_budget = 400000;   // construct visits per walk
  std::size_t ext_fanout = 8;         // lexicon entries tried past the input
  std::size_t partial_fanout = 16;    // entries tried for an unfinished last token
  std::size_t max_extension = 12;     // generated tokens per completion
  std::size_t max_results = 100;      // enumerated completions / parses kept
};

struct RawParse {
  std::size_t consumed = 0;
  std::vector<AtomSpan> atoms;
};

struct Emitted {
  std::vector<Token> tokens;
  std::vector<AtomSpan> atoms;
};

class Walker {
 public:
  using K = util::FunctionRef<void(std::size_t)>;

  Walker(const Grammar& g, std::span<const Token> input, bool partial_last, Mode mode,
         const WalkLimits& limits = {}, std::mt19937_64* rng = nullptr)
      : g_(g), in_(input), n_(input.size()), partial_(partial_last && !input.empty()), mode_(mode),
        lim_(limits), rng_(rng) {
    emits_ = mode == Mode::Enumerate || mode == Mode::Sample;
  }

  void run() {
    const Production& root = g_.root_production();
    auto done = [&](std::size_t pos) { root_done(pos); };
    walk(root.body, 0, done);
  }

  const std::vector<RawParse>& parses() const { return parses_; }
  const std::vector<Emitted>& emitted() const { return emitted_; }
  bool succeeded() const { return success_; }
  bool truncated() const { return truncated_; }
  std::size_t steps() const { return steps_; }

 private:
  struct Draft {
    std::optional<std::string> field;
    std::optional<Op> op;
    std::optional<Value> value;
    std::optional<std::string> unit;
    std::optional<int> count;
    bool negated = false;
    bool touched = false;
    bool compat_value = false;
    bool compat_unit = false;
    std::size_t value_begin = 0, value_end = 0;
    std::string value_format;
  };

  std::size_t cursor(std::size_t pos) const { return emits_ ? out_.size() : pos; }
  bool beyond(std::size_t pos) const { return pos >= n_; }
  bool open_at(std::size_t pos) const { return partial_ && pos + 1 == n_; }

  // User finished the input with a separator and nothing was added yet: the
  // completion has to go at least one token further.
  bool needs_more() const { return generated_ == 0 && !partial_ && n_ > 0; }

  void walk(NodeId id, std::size_t pos, K k) {
    if (stop_) return;
    if (++steps_ > lim_.step_budget) {
      stop_ = true;
      truncated_ = true;
      return;
    }
    if (mode_ == Mode::Analyze && pos >= n_) {
      success_ = true;
      stop_ = true;
      return;
    }
    const Node& nd = g_.node(id);
    using NK = Node::Kind;
    switch (nd.kind) {
      case NK::Empty: k(pos); return;
      case NK::Lit: lit(nd, 0, pos, k); return;
      case NK::Seq: seq(nd, 0, pos, k); return;
      case NK::Alt:
        if (mode_ == Mode::Sample) {
          std::uniform_int_distribution<std::size_t> pick(0, nd.kids.size() - 1);
          walk(nd.kids[pick(*rng_)], pos, k);
          return;
        }
        for (auto kid : nd.kids) {
          walk(kid, pos, k);
          if (stop_) return;
        }
        return;
      case NK::Opt: {
        if (mode_ == Mode::Sample) {
          if (std::bernoulli_distribution(0.5)(*rng_))
            walk(nd.kids[0], pos, k);
          else
            k(pos);
          return;
        }
        if (beyond(pos)) {  // shortest extension first
          k(pos);
          if (!stop_) walk(nd.kids[0], pos, k);
        } else {
          walk(nd.kids[0], pos, k);
          if (!stop_) k(pos);
        }
        return;
      }
      case NK::Ref: {
        if (depth_ >= lim_.max_depth) return;
        ++depth_;
        auto back = [&](std::size_t p) {
          --depth_;
          k(p);
          ++depth_;
        };
        walk(g_.productions[static_cast<std::size_t>(nd.target)].body, pos, back);
        --depth_;
        return;
      }
      case NK::Lex: lex(nd, pos, k); return;
      case NK::Star:
      case NK::Plus: rep(nd, pos, k, 0, 0); return;
      case NK::CompatValue:
      case NK::CompatUnit: {
        bool& flag = nd.kind == NK::CompatValue ? draft_.compat_value : draft_.compat_unit;
        bool saved = flag;
        flag = true;
        k(pos);
        flag = saved;
        return;
      }
      case NK::Completable: completable(nd, pos, k); return;
      case NK::Mark: mark(pos, k); return;
      case NK::Action: action(nd, pos, k); return;
    }
  }

  void seq(const Node& nd, std::size_t i, std::size_t pos, K k) {
    if (i == nd.kids.size()) {
      k(pos);
      return;
    }
    auto next = [&](std::size_t p) { seq(nd, i + 1, p, k); };
    walk(nd.kids[i], pos, next);
  }

  // ---------------------------------------------------------------- output

  std::string default_lead(const Token& t) const {
    if (out_.empty() || t.text == ",") return "";
    return " ";
  }

  void push_input(std::size_t pos, const Token* completed) {
    if (!emits_) return;
    Token t = in_[pos];
    if (completed && completed->text != t.text) {
      t.text = completed->text;
      t.surface = completed->surface;
    }
    out_.push_back(std::move(t));
  }

  void push_generated(const Token& src, bool first) {
    Token t;
    t.text = src.text;
    t.surface = src.surface;
    t.lead = first ? default_lead(src) : src.lead;
    out_.push_back(std::move(t));
    ++generated_;
  }

  void pop_output(std::size_t count, std::size_t generated) {
    if (!emits_) return;
    out_.resize(out_.size() - count);
    generated_ -= generated;
  }

  bool over_budget() const { return mode_ == Mode::Enumerate && generated_ > lim_.max_extension; }

  // ---------------------------------------------------------------- literals

  void lit(const Node& nd, std::size_t j, std::size_t pos, K k) {
    if (j == nd.lit.size()) {
      k(pos);
      return;
    }
    const Token& want = nd.lit[j];
    if (!beyond(pos)) {
      const Token& t = in_[pos];
      bool ok = open_at(pos) ? text::starts_with(want.text, t.text) : want.text == t.text;
      if (!ok) return;
      push_input(pos, &want);
      lit(nd, j + 1, pos + 1, k);
      pop_output(emits_ ? 1 : 0, 0);
      return;
    }
    if (mode_ == Mode::Analyze) {
      success_ = stop_ = true;
      return;
    }
    if (!emits_) return;
    push_generated(want, j == 0);
    if (!over_budget()) lit(nd, j + 1, pos, k);
    pop_output(1, 1);
  }

  // ---------------------------------------------------------------- lexicons

  const Lexicon* lexicon_for(const Node& nd) const {
    const Lexicon* lex = &g_.lexicon(nd.target);
    if (nd.role == Role::Value && draft_.compat_value) {
      if (!draft_.field) return nullptr;
      const FieldDescriptor* f = g_.domain->field(*draft_.field);
      if (!f || f->value_kind != ValueKind::Enum) return nullptr;
      auto it = g_.typed_values.find(nd.target);
      if (it == g_.typed_values.end()) return lex;
      auto jt = it->second.find(f->enum_type);
      return jt == it->second.end() ? nullptr : jt->second.get();
    }
    if (nd.role == Role::Unit && draft_.compat_unit) {
      if (!draft_.field) return nullptr;
      auto it = g_.field_units.find(nd.target);
      if (it == g_.field_units.end()) return lex;
      auto jt = it->second.find(*draft_.field);
      return jt == it->second.end() ? nullptr : jt->second.get();
    }
    return lex;
  }

  void lex(const Node& nd, std::size_t pos, K k) {
    const Lexicon* lexp = lexicon_for(nd);
    if (!lexp || lexp->empty()) return;
    const Lexicon& L = *lexp;
    const auto& trie = L.trie();

    if (mode_ == Mode::Sample) {
      std::vector<double> w(L.size());
      for (std::size_t i = 0; i < L.size(); ++i) w[i] = L.at(i).weight + 1e-9;
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      apply(nd, L.at(pick(*rng_)), pos, 0, false, k);
      return;
    }

    if (beyond(pos)) {
      if (mode_ != Mode::Enumerate) return;
      std::size_t tried = 0;
      for (auto id : trie.candidates(trie.root())) {
        if (tried++ >= lim_.ext_fanout || stop_) break;
        apply(nd, L.at(id), pos, 0, false, k);
      }
      return;
    }

    auto node = trie.root();
    for (std::size_t j = pos; j < n_; ++j) {
      if (j > pos) {
        auto sp = trie.child(node, ' ');
        if (!sp) return;
        node = *sp;
      }
      auto nx = trie.descend(node, in_[j].text);
      if (!nx) return;
      node = *nx;
      std::size_t used = j - pos + 1;
      if (open_at(j)) {
        std::size_t limit = mode_ == Mode::Analyze ? 64 : lim_.partial_fanout;
        std::size_t tried = 0;
        for (auto id : trie.candidates(node)) {
          if (tried++ >= limit || stop_) break;
          apply(nd, L.at(id), pos, used, true, k);
        }
        return;
      }
      for (auto id : trie.terminals(node)) {
        if (stop_) return;
        apply(nd, L.at(id), pos, used, false, k);
      }
      if (j + 1 == n_ && (mode_ == Mode::Enumerate || mode_ == Mode::Analyze)) {
        auto sp = trie.child(node, ' ');
        if (!sp) return;
        std::size_t limit = mode_ == Mode::Analyze ? 64 : lim_.ext_fanout;
        std::size_t tried = 0;
        for (auto id : trie.candidates(*sp)) {
          if (tried++ >= limit || stop_) break;
          apply(nd, L.at(id), pos, used, false, k);
        }
      }
    }
  }

  void apply(const Node& nd, const LexiconEntry& e, std::size_t pos, std::size_t used, bool open, K k) {
    std::size_t c0 = cursor(pos);
    std::size_t pushed = 0, gen = 0;
    if (emits_) {
      for (std::size_t i = 0; i < e.tokens.size(); ++i) {
        if (i < used) {
          push_input(pos + i, open && i + 1 == used ? &e.tokens[i] : nullptr);
        } else {
          push_generated(e.tokens[i], i == 0);
          ++gen;
        }
        ++pushed;
      }
      if (over_budget()) {
        pop_output(pushed, gen);
        return;
      }
    }
    Draft saved = draft_;
    if (apply_role(nd.role, e, c0, cursor(pos) + (emits_ ? 0 : used))) k(pos + used);
    draft_ = std::move(saved);
    pop_output(pushed, gen);
  }

  bool apply_role(Role role, const LexiconEntry& e, std::size_t c0, std::size_t c1) {
    const Domain& dom = *g_.domain;
    switch (role) {
      case Role::None: return true;
      case Role::Field: {
        auto bar = e.target.find('|');
        std::string f = e.target.substr(0, bar);
        if (draft_.field && *draft_.field != f) return false;
        draft_.field = f;
        if (bar != std::string::npos) draft_.op = parse_op(e.target.substr(bar + 1));
        break;
      }
      case Role::Value: {
        if (draft_.value) return false;
        if (draft_.field) {
          const FieldDescriptor* f = dom.field(*draft_.field);
          if (f && f->value_kind == ValueKind::Enum && !f->enum_domain.count(e.target)) return false;
        }
        draft_.value = EnumValue{e.target};
        draft_.value_begin = c0;
        draft_.value_end = c1;
        break;
      }
      case Role::Unit:
        if (draft_.unit) return false;
        draft_.unit = e.target;
        break;
      case Role::Op: draft_.op = parse_op(e.target); break;
      case Role::Atom: {
        if (draft_.field || draft_.value) return false;
        const Atom& a = g_.atom_targets.at(e.target);
        draft_.field = a.field;
        draft_.op = a.op;
        draft_.value = a.value;
        if (a.negated) draft_.negated = !draft_.negated;
        draft_.value_begin = c0;
        draft_.value_end = c1;
        break;
      }
      case Role::Count: {
        int v = 0;
        std::from_chars(e.target.data(), e.target.data() + e.target.size(), v);
        draft_.count = v;
        draft_.value_begin = c0;
        break;
      }
      case Role::TimeUnit: {
        if (draft_.value) return false;
        auto u = parse_time_unit(e.target);
        if (!draft_.count) draft_.value_begin = c0;
        draft_.value = RelativeTime{draft_.count.value_or(1), *u, "NOW"};
        draft_.value_end = c1;
        break;
      }
      case Role::Keyword:
        if (draft_.field && *draft_.field != e.target) return false;
        if (draft_.value) return false;
        draft_.field = e.target;
        draft_.op = Op::Contains;
        draft_.value = StringValue{e.key};
        draft_.value_begin = c0;
        draft_.value_end = c1;
        break;
    }
    draft_.touched = true;
    return true;
  }

  void action(const Node& nd, std::size_t pos, K k) {
    const Action& a = nd.action;
    Draft saved = draft_;
    bool saved_or = pending_or_;
    bool ok = true;
    if (a.field) {
      if (draft_.field && *draft_.field != *a.field) ok = false;
      draft_.field = a.field;
    }
    if (a.op) draft_.op = a.op;
    if (a.unit) {
      if (draft_.unit && *draft_.unit != *a.unit) ok = false;
      draft_.unit = a.unit;
    }
    if (a.value) {
      if (draft_.value) ok = false;
      draft_.value = EnumValue{*a.value};
      draft_.value_begin = draft_.value_end = cursor(pos);
    }
    if (a.negate) draft_.negated = !draft_.negated;
    if (a.field || a.op || a.unit || a.value || a.negate) draft_.touched = true;
    if (a.disjoin) pending_or_ = true;
    if (ok) k(pos);
    draft_ = std::move(saved);
    pending_or_ = saved_or;
  }

  // ---------------------------------------------------------------- repetition

  void rep(const Node& nd, std::size_t pos, K k, int count, int after) {
    const int min = nd.kind == Node::Kind::Plus ? 1 : 0;
    if (mode_ == Mode::Sample) {
      bool more = count < min || (count < 3 && std::bernoulli_distribution(0.35)(*rng_));
      if (!more) {
        k(pos);
        return;
      }
    } else {
      if (count >= min) {
        k(pos);
        if (stop_) return;
      }
      if (beyond(pos) && after >= 1) return;
    }
    std::size_t c0 = cursor(pos);
    int next_after = after + (beyond(pos) ? 1 : 0);
    auto again = [&](std::size_t p) {
      if (cursor(p) == c0 && p == pos) return;  // no progress
      rep(nd, p, k, count + 1, next_after);
    };
    auto element = [&](std::size_t p) { walk(nd.kids[0], p, again); };
    if (count > 0 && nd.kids.size() > 1)
      walk(nd.kids[1], pos, element);
    else
      element(pos);
  }

  // ---------------------------------------------------------------- completable

  bool set_value(Value v, std::size_t c0, std::size_t c1, std::string format = {}) {
    if (draft_.value) return false;
    draft_.value = std::move(v);
    draft_.value_begin = c0;
    draft_.value_end = c1;
    draft_.value_format = std::move(format);
    draft_.touched = true;
    return true;
  }

  void completable(const Node& nd, std::size_t pos, K k) {
    if (nd.name == "numeric")
      numeric(nd, pos, k);
    else
      date(pos, k);
  }

  void numeric(const Node& nd, std::size_t pos, K k) {
    std::size_t c0 = cursor(pos);
    if (beyond(pos)) {
      if (mode_ != Mode::Sample) return;
      static const char* samples[] = {"1", "2", "5", "10", "25", "50", "100", "2m", "500k", "1b", "3.5"};
      std::uniform_int_distribution<std::size_t> pick(0, std::size(samples) - 1);
      Token t;
      t.text = t.surface = samples[pick(*rng_)];
      auto p = parse_number(t.text);
      push_generated(t, true);
      Draft saved = draft_;
      if (set_value(NumericValue{p->magnitude, p->scale, ""}, c0, c0 + 1)) k(pos);
      draft_ = std::move(saved);
      pop_output(1, 1);
      return;
    }
    const Token& t = in_[pos];
    Draft saved = draft_;
    if (open_at(pos)) {
      if (mode_ == Mode::Analyze) {
        if (is_number_prefix(t.text)) k(pos + 1);
        return;
      }
      // Enumerate: keep what was typed and mark the rest as elided
      auto p = parse_number(t.text);
      if (!p) return;
      Token shown = t;
      shown.text += nd.sub;
      shown.surface += nd.sub;
      out_.push_back(shown);
      if (set_value(NumericValue{p->magnitude, p->scale, ""}, c0, c0 + 1)) k(pos + 1);
      draft_ = std::move(saved);
      out_.pop_back();
      return;
    }
    auto p = parse_number(t.text);
    if (!p) return;
    push_input(pos, nullptr);
    if (set_value(NumericValue{p->magnitude, p->scale, ""}, c0, c0 + 1)) k(pos + 1);
    draft_ = std::move(saved);
    pop_output(emits_ ? 1 : 0, 0);
  }

  void date(std::size_t pos, K k) {
    std::size_t c0 = cursor(pos);
    if (beyond(pos)) {
      if (mode_ != Mode::Sample) return;
      std::uniform_int_distribution<int> fmt(0, 2), year(2016, 2030), month(1, 12), day(1, 28);
      ExactDate d;
      d.year = year(*rng_);
      int f = fmt(*rng_);
      if (f >= 1) d.month = month(*rng_);
      if (f == 2) d.day = day(*rng_);
      const char* id = f == 0 ? "Y" : f == 1 ? "MY" : "MDcY";
      auto toks = text::tokenize(format_date(d, id));
      for (std::size_t i = 0; i < toks.size(); ++i) push_generated(toks[i], i == 0);
      Draft saved = draft_;
      if (set_value(d, c0, c0 + toks.size(), id)) k(pos);
      draft_ = std::move(saved);
      pop_output(toks.size(), toks.size());
      return;
    }
    auto matches = match_dates(in_, pos, partial_, mode_ == Mode::Analyze);
    for (const auto& m : matches) {
      if (stop_) return;
      if (!m.complete) {
        k(n_);  // the date runs past the input: completable
        continue;
      }
      for (std::size_t i = 0; i < m.len; ++i) push_input(pos + i, nullptr);
      Draft saved = draft_;
      if (set_value(m.date, c0, c0 + m.len, m.format)) k(pos + m.len);
      draft_ = std::move(saved);
      pop_output(emits_ ? m.len : 0, 0);
    }
  }

  // ---------------------------------------------------------------- atoms

  void mark(std::size_t pos, K k) {
    std::size_t saved_begin = atom_begin_;
    if (!draft_.touched) {  // filler phrase: just move the atom boundary
      atom_begin_ = cursor(pos);
      k(pos);
      atom_begin_ = saved_begin;
      return;
    }
    if (!draft_.field || !draft_.value) return;
    Atom a{*draft_.field, draft_.op.value_or(Op::Eq), *draft_.value, draft_.negated};
    if (draft_.unit) {
      auto* num = std::get_if<NumericValue>(&a.value);
      if (!num) return;
      num->unit = *draft_.unit;
    }
    if (!g_.domain->check(a).empty()) return;
    AtomSpan span{a, atom_begin_, cursor(pos), pending_or_, draft_.value_begin, draft_.value_end,
                  draft_.value_format};
    Draft saved = std::move(draft_);
    bool saved_or = pending_or_;
    draft_ = Draft{};
    pending_or_ = false;
    atom_begin_ = cursor(pos);
    atoms_.push_back(std::move(span));
    if (mode_ == Mode::Enumerate && beyond(pos) && !needs_more())
      emit();
    else
      k(pos);
    atoms_.pop_back();
    draft_ = std::move(saved);
    pending_or_ = saved_or;
    atom_begin_ = saved_begin;
  }

  void emit() {
    if (atoms_.empty()) return;
    emitted_.push_back(Emitted{out_, atoms_});
    if (emitted_.size() >= lim_.max_results) stop_ = true;
  }

  void root_done(std::size_t pos) {
    if (draft_.touched) return;
    switch (mode_) {
      case Mode::Parse:
        if (pos == n_) add_parse(pos);
        return;
      case Mode::Decompose: add_parse(pos); return;
      case Mode::Analyze:
        if (pos >= n_) success_ = stop_ = true;
        return;
      case Mode::Enumerate:  // only the typed text itself; extensions end at a mark
        if (beyond(pos) && generated_ == 0 && !needs_more()) emit();
        return;
      case Mode::Sample:
        emitted_.push_back(Emitted{out_, atoms_});
        stop_ = true;
        return;
    }
  }

  void add_parse(std::size_t pos) {
    if (mode_ == Mode::Decompose && !parses_.empty()) {
      if (pos < parses_.front().consumed) return;
      if (pos > parses_.front().consumed) parses_.clear();
    }
    if (parses_.size() >= lim_.max_results) return;
    parses_.push_back(RawParse{pos, atoms_});
  }

  const Grammar& g_;
  std::span<const Token> in_;
  std::size_t n_;
  bool partial_;
  Mode mode_;
  WalkLimits lim_;
  std::mt19937_64* rng_;
  bool emits_ = false;

  std::vector<Token> out_;
  std::size_t generated_ = 0;
  Draft draft_;
  std::size_t atom_begin_ = 0;
  bool pending_or_ = false;
  std::vector<AtomSpan> atoms_;
  int depth_ = 0;
  std::size_t steps_ = 0;
  bool stop_ = false, success_ = false, truncated_ = false;

  std::vector<RawParse> parses_;
  std::vector<Emitted> emitted_;
};

}  // namespace semc::grammar
