#include <gtest/gtest.h>

#include <thread>

#include "vizpipe/service/events.hpp"

using namespace vizpipe::service;

TEST(EventBus, LateSubscribersReceiveTheBacklogFirst) {
  EventBus bus(3);
  for (int i = 0; i < 5; ++i) bus.publish("s", "generate", "started", {{"i", i}});
  std::vector<std::uint64_t> seqs;
  const auto token = bus.subscribe("s", [&](const Event& e) { seqs.push_back(e.seq); });
  bus.publish("s", "filter", "completed");
  bus.publish("other", "filter", "completed");
  EXPECT_EQ(seqs, (std::vector<std::uint64_t>{3, 4, 5, 6}));
  bus.unsubscribe(token);
  bus.publish("s", "filter", "completed");
  EXPECT_EQ(seqs.size(), 4u);
  EXPECT_EQ(bus.backlog("s").size(), 3u);
  bus.forget("s");
  EXPECT_TRUE(bus.backlog("s").empty());
}

TEST(EventBus, SequenceNumbersAreDensePerSessionUnderConcurrency) {
  EventBus bus(10000);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 250; ++i) bus.publish("s", "execute", "completed");
    });
  for (auto& t : threads) t.join();
  const auto log = bus.backlog("s");
  ASSERT_EQ(log.size(), 1000u);
  for (std::size_t i = 0; i < log.size(); ++i) EXPECT_EQ(log[i].seq, i + 1);
  EXPECT_EQ(to_json_value(log[0])["stage"], "execute");
}
