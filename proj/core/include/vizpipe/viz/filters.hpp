#pragma once

#include <string>
#include <vector>

#include "vizpipe/llm/provider.hpp"
#include "vizpipe/viz/sandbox.hpp"

namespace vizpipe::viz {

/// Equality key for consensus clustering. Removes comments (outside string
/// literals), drops blank lines, collapses whitespace runs inside a line
/// and drops whitespace that does not separate two identifier characters.
/// Python keeps its leading indentation since it is significant there;
/// JSON is compared as a single line.
std::string normalize_code(const std::string& code, const std::string& language_id);

/// Largest cluster of compiled_ok candidates by normalize_code equality.
/// Returns the lowest-positioned member; ties between clusters go to the
/// cluster whose first member comes first. Throws PreconditionViolation for
/// fewer than two candidates and NoViableCandidate when none compiled.
CandidateProgram select_by_consistency(const std::vector<CandidateProgram>& candidates,
                                       const std::string& language_id = "");

/// argmax over compiled_ok candidates with scores[i] belonging to
/// candidates[i]; the first maximum wins. Throws NoViableCandidate.
CandidateProgram select_by_scores(const std::vector<CandidateProgram>& candidates, const std::vector<double>& scores);

/// Scores every compiled_ok candidate with llm::score_correctness (an
/// unparseable reply scores 0) and returns the best, with correctness_score
/// set. Throws NoViableCandidate.
CandidateProgram select_by_correctness(const std::vector<CandidateProgram>& candidates, llm::TextProvider& provider,
                                       const llm::GenerationConfig& config, const std::string& context = "");

/// First compiled_ok candidate. Throws NoViableCandidate.
CandidateProgram select_first_compiled(const std::vector<CandidateProgram>& candidates);

}  // namespace vizpipe::viz
