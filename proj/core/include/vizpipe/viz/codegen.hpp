#pragma once

#include <string>

#include "vizpipe/goals/goal_explorer.hpp"
#include "vizpipe/llm/types.hpp"
#include "vizpipe/viz/scaffold.hpp"

namespace vizpipe::viz {

/// Fill-in-the-middle request for the stub of `scaffold`. The summary and
/// goal travel in the user message; the scaffold halves travel as the FIM
/// prefix and suffix.
llm::PromptRequest build_codegen_prompt(const std::string& summary_text, const goals::Goal& goal,
                                        const Scaffold& scaffold);

/// Post-processes a raw model reply into a stub: strips markdown fences,
/// drops prose before the first code line, cuts echoed scaffold lines,
/// trims blank edges and re-indents to scaffold.stub_indent. May return an
/// empty string.
std::string prepare_stub(const Scaffold& scaffold, const std::string& raw);

/// Replaces the stub marker with `stub`. Throws EmptyStub when `stub` is
/// blank.
std::string assemble(const Scaffold& scaffold, const std::string& stub);

}  // namespace vizpipe::viz
