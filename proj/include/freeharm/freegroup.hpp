#pragma once

// Combinatorics of the free group on the generators a, b: reduced words,
// shortlex order, balls, symmetric shortlex segments, generalized Cayley
// graphs and finite permutation quotients.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "freeharm/error.hpp"

namespace freeharm {

/// Generators and their inverses. The numeric values fix the letter order a < b < A < B.
enum class Letter : std::uint8_t { a = 0, b = 1, A = 2, B = 3 };

constexpr Letter inverse(Letter l) noexcept {
  return static_cast<Letter>((static_cast<std::uint8_t>(l) + 2) % 4);
}

constexpr char to_char(Letter l) noexcept {
  constexpr char table[] = {'a', 'b', 'A', 'B'};
  return table[static_cast<std::uint8_t>(l)];
}

inline Letter letter_from_char(char c) {
  switch (c) {
    case 'a': return Letter::a;
    case 'b': return Letter::b;
    case 'A': return Letter::A;
    case 'B': return Letter::B;
    default:
      throw InputError(std::string("invalid letter '") + c + "' (expected one of a, b, A, B)");
  }
}

/// A reduced word in a, b and their inverses. The empty word is the identity e.
class Word {
 public:
  Word() = default;

  /// Freely reduces an arbitrary letter sequence.
  static Word reduce(std::span<const Letter> letters) {
    Word w;
    for (Letter l : letters) w.push_reducing(l);
    return w;
  }

  /// Parses and freely reduces a string over a, b, A, B. The empty string is e.
  static Word parse(std::string_view text) {
    Word w;
    for (char c : text) w.push_reducing(letter_from_char(c));
    return w;
  }

  /// Parses a string that must already be reduced.
  static Word parse_reduced(std::string_view text) {
    Word w = parse(text);
    if (w.length() != text.size())
      throw InputError("word '" + std::string(text) + "' is not reduced");
    return w;
  }

  static Word generator(Letter l) {
    Word w;
    w.letters_.push_back(l);
    return w;
  }

  std::size_t length() const noexcept { return letters_.size(); }
  bool is_identity() const noexcept { return letters_.empty(); }
  std::span<const Letter> letters() const noexcept { return letters_; }
  Letter operator[](std::size_t i) const { return letters_[i]; }

  Word inverse() const {
    Word w;
    w.letters_.reserve(letters_.size());
    for (auto it = letters_.rbegin(); it != letters_.rend(); ++it) w.letters_.push_back(freeharm::inverse(*it));
    return w;
  }

  Word operator*(const Word& rhs) const {
    Word w = *this;
    for (Letter l : rhs.letters_) w.push_reducing(l);
    return w;
  }

  std::string str() const {
    std::string s;
    s.reserve(letters_.size());
    for (Letter l : letters_) s.push_back(to_char(l));
    return s;
  }

  /// Shortlex: by length, then lexicographically with a < b < A < B.
  std::strong_ordering operator<=>(const Word& rhs) const noexcept {
    if (auto c = letters_.size() <=> rhs.letters_.size(); c != 0) return c;
    return std::lexicographical_compare_three_way(letters_.begin(), letters_.end(), rhs.letters_.begin(),
                                                  rhs.letters_.end());
  }
  bool operator==(const Word& rhs) const noexcept = default;

  /// True when this word is the shortlex-smaller element of {w, w^-1}.
  bool is_inverse_representative() const { return *this <= inverse(); }

 private:
  void push_reducing(Letter l) {
    if (!letters_.empty() && letters_.back() == freeharm::inverse(l))
      letters_.pop_back();
    else
      letters_.push_back(l);
  }

  std::vector<Letter> letters_;
};

struct WordHash {
  std::size_t operator()(const Word& w) const noexcept {
    std::size_t h = w.length();
    for (Letter l : w.letters()) h = h * 5 + static_cast<std::size_t>(l) + 1;
    return h;
  }
};

/// K_r, the number of reduced words of length at most r.
constexpr std::size_t ball_size(std::size_t r) noexcept {
  std::size_t p = 1;
  for (std::size_t i = 0; i < r; ++i) p *= 3;
  return 2 * p - 1;
}

namespace detail {

// Smallest letter that may follow `prev` in a reduced word (a unless prev is A).
inline Letter min_follower(std::optional<Letter> prev) {
  return (prev && *prev == Letter::A) ? Letter::b : Letter::a;
}

inline Letter max_follower(std::optional<Letter> prev) {
  return (prev && *prev == Letter::b) ? Letter::A : Letter::B;
}

inline std::vector<Letter> minimal_word(std::size_t n) { return std::vector<Letter>(n, Letter::a); }

inline std::vector<Letter> maximal_word(std::size_t n) { return std::vector<Letter>(n, Letter::B); }

}  // namespace detail

/// The immediate successor g_down of g in shortlex order over all reduced words.
inline Word successor(const Word& g) {
  std::vector<Letter> w(g.letters().begin(), g.letters().end());
  const std::size_t n = w.size();
  for (std::size_t i = n; i-- > 0;) {
    std::optional<Letter> prev = i > 0 ? std::optional<Letter>(w[i - 1]) : std::nullopt;
    for (auto v = static_cast<int>(w[i]) + 1; v < 4; ++v) {
      auto cand = static_cast<Letter>(v);
      if (prev && cand == inverse(*prev)) continue;
      w[i] = cand;
      for (std::size_t k = i + 1; k < n; ++k) w[k] = detail::min_follower(w[k - 1]);
      return Word::reduce(w);
    }
  }
  return Word::reduce(detail::minimal_word(n + 1));
}

/// The immediate predecessor g_up of g in shortlex order. Undefined for e.
inline Word predecessor(const Word& g) {
  if (g.is_identity()) throw DomainError("predecessor of the identity is undefined");
  std::vector<Letter> w(g.letters().begin(), g.letters().end());
  const std::size_t n = w.size();
  for (std::size_t i = n; i-- > 0;) {
    std::optional<Letter> prev = i > 0 ? std::optional<Letter>(w[i - 1]) : std::nullopt;
    for (auto v = static_cast<int>(w[i]) - 1; v >= 0; --v) {
      auto cand = static_cast<Letter>(v);
      if (prev && cand == inverse(*prev)) continue;
      w[i] = cand;
      for (std::size_t k = i + 1; k < n; ++k) w[k] = detail::max_follower(w[k - 1]);
      return Word::reduce(w);
    }
  }
  return Word::reduce(detail::maximal_word(n - 1));
}

/// The ball B_r in shortlex order, with O(1) index lookup.
class Ball {
 public:
  explicit Ball(std::size_t radius) : radius_(radius) {
    // BFS by level, appending a, b, A, B on the right. Appending preserves the
    // lexicographic order of parents, so each level comes out in shortlex order.
    words_.reserve(ball_size(radius));
    words_.emplace_back();
    std::size_t level_begin = 0;
    for (std::size_t len = 1; len <= radius; ++len) {
      const std::size_t level_end = words_.size();
      for (std::size_t p = level_begin; p < level_end; ++p) {
        for (int v = 0; v < 4; ++v) {
          const auto l = static_cast<Letter>(v);
          const Word& parent = words_[p];
          if (!parent.is_identity() && parent[parent.length() - 1] == inverse(l)) continue;
          words_.push_back(parent * Word::generator(l));
        }
      }
      level_begin = level_end;
    }
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
  }

  std::size_t radius() const noexcept { return radius_; }
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<Word>& words() const noexcept { return words_; }
  const Word& operator[](std::size_t i) const { return words_[i]; }
  auto begin() const noexcept { return words_.begin(); }
  auto end() const noexcept { return words_.end(); }

  bool contains(const Word& w) const { return w.length() <= radius_; }

  std::size_t index_of(const Word& w) const {
    auto it = index_.find(w);
    if (it == index_.end())
      throw DomainError("word '" + w.str() + "' is outside the ball of radius " + std::to_string(radius_));
    return it->second;
  }

 private:
  std::size_t radius_;
  std::vector<Word> words_;
  std::unordered_map<Word, std::size_t, WordHash> index_;
};

inline std::vector<Word> ball(std::size_t r) { return Ball(r).words(); }

/// I_g: every h with h <= g in shortlex order, together with h^-1. Sorted shortlex.
inline std::vector<Word> symmetric_segment(const Word& g) {
  std::vector<Word> out;
  for (const Word& h : Ball(g.length())) {
    if (h > g) break;
    out.push_back(h);
    out.push_back(h.inverse());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Edges {i, j}, i < j, of Cay(F, g) restricted to `vertices`: l^-1 h in I_g \ {e}.
inline std::vector<std::pair<std::size_t, std::size_t>> cayley_edges(const Word& g, std::span<const Word> vertices) {
  const std::vector<Word> segment = symmetric_segment(g);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < vertices.size(); ++j) {
      const Word diff = vertices[j].inverse() * vertices[i];
      if (diff.is_identity()) continue;
      if (std::binary_search(segment.begin(), segment.end(), diff)) edges.emplace_back(i, j);
    }
  }
  return edges;
}

/// A permutation of {0, ..., d-1}, stored as its image list.
class Permutation {
 public:
  Permutation() = default;

  explicit Permutation(std::vector<int> images) : images_(std::move(images)) {
    std::vector<bool> seen(images_.size(), false);
    for (int v : images_) {
      if (v < 0 || static_cast<std::size_t>(v) >= images_.size() || seen[static_cast<std::size_t>(v)])
        throw InputError("image list is not a permutation");
      seen[static_cast<std::size_t>(v)] = true;
    }
  }

  static Permutation identity(std::size_t d) {
    std::vector<int> v(d);
    std::iota(v.begin(), v.end(), 0);
    return Permutation(std::move(v));
  }

  std::size_t degree() const noexcept { return images_.size(); }
  int operator()(int j) const { return images_[static_cast<std::size_t>(j)]; }
  const std::vector<int>& images() const noexcept { return images_; }

  /// Composition (*this ∘ rhs)(j) = (*this)(rhs(j)).
  Permutation operator*(const Permutation& rhs) const {
    std::vector<int> v(images_.size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = images_[static_cast<std::size_t>(rhs.images_[j])];
    Permutation p;
    p.images_ = std::move(v);
    return p;
  }

  Permutation inverse() const {
    std::vector<int> v(images_.size());
    for (std::size_t j = 0; j < v.size(); ++j) v[static_cast<std::size_t>(images_[j])] = static_cast<int>(j);
    Permutation p;
    p.images_ = std::move(v);
    return p;
  }

  bool is_identity() const {
    for (std::size_t j = 0; j < images_.size(); ++j)
      if (images_[j] != static_cast<int>(j)) return false;
    return true;
  }

  auto operator<=>(const Permutation&) const = default;

 private:
  std::vector<int> images_;
};

/// All of Sym(d) in lexicographic order of image lists (identity first).
inline std::vector<Permutation> all_permutations(std::size_t d) {
  std::vector<int> v(d);
  std::iota(v.begin(), v.end(), 0);
  std::vector<Permutation> out;
  do {
    out.emplace_back(v);
  } while (std::next_permutation(v.begin(), v.end()));
  return out;
}

/// An action of F on [d] given by the images of the two generators.
class FiniteQuotientAction {
 public:
  FiniteQuotientAction(Permutation sigma_a, Permutation sigma_b)
      : sigma_a_(std::move(sigma_a)), sigma_b_(std::move(sigma_b)) {
    if (sigma_a_.degree() == 0) throw InputError("quotient action needs d >= 1");
    if (sigma_a_.degree() != sigma_b_.degree()) throw InputError("sigma_a and sigma_b have different degrees");
  }

  std::size_t d() const noexcept { return sigma_a_.degree(); }
  const Permutation& sigma_a() const noexcept { return sigma_a_; }
  const Permutation& sigma_b() const noexcept { return sigma_b_; }

  Permutation generator(Letter l) const {
    switch (l) {
      case Letter::a: return sigma_a_;
      case Letter::b: return sigma_b_;
      case Letter::A: return sigma_a_.inverse();
      case Letter::B: return sigma_b_.inverse();
    }
    return sigma_a_;
  }

  /// The homomorphism F -> Sym(d): sigma(l1 ... ln) = sigma(l1) ∘ ... ∘ sigma(ln).
  Permutation evaluate(const Word& w) const {
    Permutation p = Permutation::identity(d());
    for (Letter l : w.letters()) p = p * generator(l);
    return p;
  }

 private:
  Permutation sigma_a_;
  Permutation sigma_b_;
};

/// The finite group Gamma generated by sigma_a, sigma_b, sorted (identity first).
class QuotientClosure {
 public:
  explicit QuotientClosure(const FiniteQuotientAction& act) : act_(act) {
    std::vector<Permutation> frontier{Permutation::identity(act.d())};
    std::vector<Permutation> gens{act.sigma_a(), act.sigma_b(), act.sigma_a().inverse(), act.sigma_b().inverse()};
    std::vector<Permutation> found = frontier;
    while (!frontier.empty()) {
      std::vector<Permutation> next;
      for (const auto& p : frontier) {
        for (const auto& s : gens) {
          Permutation q = s * p;
          if (std::find(found.begin(), found.end(), q) == found.end()) {
            found.push_back(q);
            next.push_back(q);
          }
        }
      }
      frontier = std::move(next);
    }
    std::sort(found.begin(), found.end());
    elements_ = std::move(found);
  }

  const std::vector<Permutation>& elements() const noexcept { return elements_; }
  std::size_t size() const noexcept { return elements_.size(); }
  const FiniteQuotientAction& action() const noexcept { return act_; }

  Permutation evaluate(const Word& w) const { return act_.evaluate(w); }

  std::optional<std::size_t> index_of(const Permutation& p) const {
    auto it = std::lower_bound(elements_.begin(), elements_.end(), p);
    if (it == elements_.end() || *it != p) return std::nullopt;
    return static_cast<std::size_t>(it - elements_.begin());
  }

 private:
  FiniteQuotientAction act_;
  std::vector<Permutation> elements_;
};

}  // namespace freeharm
