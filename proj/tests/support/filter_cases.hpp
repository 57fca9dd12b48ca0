#pragma once

#include <random>
#include <string>
#include <vector>

#include "vizpipe/viz/sandbox.hpp"

// Random candidate sets with known semantic classes, shared by the filter
// unit tests and the acceptance suite.
namespace vizpipe::testutil {

using viz::CandidateProgram;
using viz::CandidateStatus;

// Semantically distinct programs. Every surface variant of one class must
// normalize to the same key, and different classes to different keys.
inline const std::vector<std::vector<std::string>> kClasses = {
    {"fig, ax = plt.subplots()", "ax.bar(data['origin'], data['mpg'])", "return plt"},
    {"fig, ax = plt.subplots()", "ax.scatter(data['hp'], data['mpg'])", "return plt"},
    {"fig, ax = plt.subplots()", "ax.hist(data['mpg'], bins=10)", "ax.set_title('mpg')", "return plt"},
};

inline std::string spaced(const std::string& line, std::mt19937& rng) {
  // Insert optional whitespace around punctuation outside string literals.
  std::string out;
  char quote = 0;
  for (char c : line) {
    if (quote) {
      out += c;
      if (c == quote) quote = 0;
      continue;
    }
    if (c == '\'') quote = c;
    const bool punct = std::string("(),=[]").find(c) != std::string::npos;
    if (punct && rng() % 2) out += std::string(1 + rng() % 3, ' ');
    out += c;
    if (punct && rng() % 2) out += rng() % 2 ? " " : "\t";
  }
  return out;
}

inline std::string render_variant(std::size_t cls, std::mt19937& rng) {
  std::string code;
  for (const auto& line : kClasses[cls]) {
    if (rng() % 4 == 0) code += "    # note " + std::to_string(rng() % 100) + "\n";
    if (rng() % 4 == 0) code += "\n";
    code += "    " + spaced(line, rng);
    if (rng() % 3 == 0) code += "  # trailing";
    code += "\n";
  }
  return code;
}

struct Case {
  std::vector<CandidateProgram> candidates;
  std::vector<std::size_t> classes;
};

inline Case random_case(std::mt19937& rng, std::size_t size) {
  Case c;
  for (std::size_t i = 0; i < size; ++i) {
    CandidateProgram p;
    p.candidate_index = static_cast<int>(i);
    const auto cls = rng() % kClasses.size();
    p.assembled_code = render_variant(cls, rng);
    p.status = rng() % 10 < 7 ? CandidateStatus::CompiledOk : (rng() % 2 ? CandidateStatus::CompileError : CandidateStatus::Timeout);
    c.candidates.push_back(p);
    c.classes.push_back(cls);
  }
  return c;
}

// Enumerates every subset of compiled candidates that share a class, keeps
// the largest (ties: the one whose lowest index is smallest) and returns
// its lowest index. -1: nothing compiled.
inline int brute_force_consensus(const Case& c) {
  const auto n = c.candidates.size();
  int best_size = 0;
  int best_first = -1;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    int first = -1;
    int size = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      if (c.candidates[i].status != CandidateStatus::CompiledOk) ok = false;
      else if (first >= 0 && c.classes[i] != c.classes[static_cast<std::size_t>(first)]) ok = false;
      if (first < 0) first = static_cast<int>(i);
      ++size;
    }
    if (!ok) continue;
    // Only maximal clusters count: every compiled member of the class must be in.
    bool maximal = true;
    for (std::size_t i = 0; i < n; ++i)
      if (!(mask & (1u << i)) && c.candidates[i].status == CandidateStatus::CompiledOk &&
          c.classes[i] == c.classes[static_cast<std::size_t>(first)])
        maximal = false;
    if (!maximal) continue;
    if (size > best_size || (size == best_size && first < best_first)) {
      best_size = size;
      best_first = first;
    }
  }
  return best_first;
}

}  // namespace vizpipe::testutil
