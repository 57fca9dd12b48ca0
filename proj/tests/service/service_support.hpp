#pragma once

#include "test_support.hpp"
#include "vizpipe/fixtures/scenarios.hpp"
#include "vizpipe/llm/cassette.hpp"
#include "vizpipe/llm/scripted.hpp"
#include "vizpipe/service/api.hpp"

namespace vizpipe::testutil {

/// An Api answering from the recorded cars cassettes.
inline service::ApiConfig replay_config(const std::filesystem::path& work_root) {
  service::ApiConfig c;
  c.provider = std::make_shared<llm::ReplayProvider>(llm::Cassette::load(cassette("cars.json")));
  c.igm = info::CassetteIgm::load(cassette("igm.json"));
  c.work_root = work_root;
  return c;
}

inline ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no vizpipe::Error thrown";
  return ErrorCode::ConfigError;
}

}  // namespace vizpipe::testutil
