#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "flowsift/flow.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace flowsift;

namespace {

PacketRecord pkt(std::uint64_t ts, std::uint32_t src_ip, std::uint16_t sport,
                 std::uint32_t dst_ip, std::uint16_t dport) {
  PacketRecord p;
  p.timestamp_us = ts;
  p.src_ip = src_ip;
  p.src_port = sport;
  p.dst_ip = dst_ip;
  p.dst_port = dport;
  p.protocol = 6;
  p.size_bytes = 100;
  return p;
}

PacketRecord mirror(const PacketRecord& p) {
  PacketRecord m = p;
  std::swap(m.src_ip, m.dst_ip);
  std::swap(m.src_port, m.dst_port);
  return m;
}

}  // namespace

TEST_CASE("bidirectional keys sort endpoints lexicographically") {
  PacketRecord p = pkt(0, 0x0A000001, 4000, 0x0A000002, 443);
  FlowKey key = flow_key_of(p, true);
  CHECK(key.endpoint_a.ip == 0x0A000001u);
  CHECK(key.endpoint_a.port == 4000);
  CHECK(key.endpoint_b.ip == 0x0A000002u);
  CHECK(key.endpoint_b.port == 443);

  // mirrored reply maps to the same key
  CHECK(flow_key_of(mirror(p), true) == key);

  // unidirectional mode keeps the two directions distinct
  CHECK(flow_key_of(p, false) != flow_key_of(mirror(p), false));
}

TEST_CASE("bidirectional key symmetry holds for random packets") {
  std::mt19937_64 eng(11);
  for (int i = 0; i < 500; ++i) {
    PacketRecord p = pkt(0, static_cast<std::uint32_t>(eng()),
                         static_cast<std::uint16_t>(eng()),
                         static_cast<std::uint32_t>(eng()),
                         static_cast<std::uint16_t>(eng()));
    CHECK(flow_key_of(p, true) == flow_key_of(mirror(p), true));
  }
}

TEST_CASE("flow key string round-trips") {
  PacketRecord p = pkt(0, 0xC0A80105, 51234, 0x08080808, 443);
  FlowKey key = flow_key_of(p, true);
  CHECK(to_string(key) == "8.8.8.8:443-192.168.1.5:51234/6");
  CHECK(parse_flow_key(to_string(key)) == key);
  CHECK_THROWS_AS(parse_flow_key("not-a-key"), Error);
}

TEST_CASE("assemble keeps one flow under the idle timeout") {
  std::vector<PacketRecord> recs;
  for (int i = 0; i < 10; ++i)
    recs.push_back(pkt(static_cast<std::uint64_t>(i) * 1'000'000, 0x0A000001,
                       4000, 0x0A000002, 443));
  auto flows = assemble_flows(recs, {.idle_timeout_us = 60'000'000});
  REQUIRE(flows.size() == 1);
  CHECK(flows[0].packets.size() == 10);
}

TEST_CASE("assemble splits on a gap reaching the idle timeout") {
  std::vector<PacketRecord> recs;
  std::uint64_t ts = 0;
  for (int i = 0; i < 10; ++i) {
    recs.push_back(pkt(ts, 0x0A000001, 4000, 0x0A000002, 443));
    ts += (i == 3) ? 61'000'000 : 1'000'000;
  }
  auto flows = assemble_flows(recs, {.idle_timeout_us = 60'000'000});
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].packets.size() == 4);
  CHECK(flows[1].packets.size() == 6);

  // a gap of exactly the timeout also splits
  std::vector<PacketRecord> exact{pkt(0, 1, 1, 2, 2),
                                  pkt(60'000'000, 1, 1, 2, 2)};
  CHECK(assemble_flows(exact, {.idle_timeout_us = 60'000'000}).size() == 2);
}

TEST_CASE("assemble matches brute-force grouping on interleaved keys") {
  std::mt19937_64 eng(3);
  std::vector<PacketRecord> recs;
  std::uint64_t ts = 0;
  for (int i = 0; i < 3000; ++i) {
    int which = static_cast<int>(eng() % 3);
    ts += eng() % 2'000'000;
    recs.push_back(pkt(ts, 0x0A000001, static_cast<std::uint16_t>(1000 + which),
                       0x0A000002, 443));
  }
  AssembleOptions opts{.idle_timeout_us = 5'000'000};
  auto flows = assemble_flows(recs, opts);

  auto grouped = oracles::brute_force_group(recs, true, opts.idle_timeout_us);
  std::size_t oracle_flows = 0, oracle_packets = 0;
  for (const auto& [key, pieces] : grouped) {
    oracle_flows += pieces.size();
    for (const auto& piece : pieces) oracle_packets += piece.size();
  }
  CHECK(flows.size() == oracle_flows);

  // partition property: every record lands in exactly one flow
  std::size_t total = 0;
  for (const auto& f : flows) {
    total += f.packets.size();
    for (std::size_t i = 1; i < f.packets.size(); ++i)
      CHECK(f.packets[i - 1].timestamp_us <= f.packets[i].timestamp_us);
  }
  CHECK(total == recs.size());
  CHECK(total == oracle_packets);

  // per-key, per-piece contents agree with the oracle
  std::map<FlowKey, std::vector<std::vector<PacketRecord>>> ours;
  for (const auto& f : flows) ours[f.key].push_back(f.packets);
  for (auto& [key, pieces] : ours) {
    REQUIRE(grouped.count(key) == 1);
    CHECK(pieces == grouped[key]);
  }
}

TEST_CASE("assemble rejects out-of-order input and honors reorder slack") {
  std::vector<PacketRecord> recs{pkt(1000, 1, 1, 2, 2), pkt(400, 1, 1, 2, 2)};
  CHECK_THROWS_WITH(assemble_flows(recs),
                    Catch::Matchers::ContainsSubstring("timestamp_us=400"));
  CHECK_NOTHROW(assemble_flows(recs, {.reorder_slack_us = 600}));
}

TEST_CASE("segmentation drops and counts the trailing remainder") {
  Flow flow;
  flow.key = flow_key_of(pkt(0, 1, 1, 2, 2), true);
  auto fill = [&flow](std::size_t n) {
    flow.packets.clear();
    for (std::size_t i = 0; i < n; ++i)
      flow.packets.push_back(pkt(i * 1000, 1, 1, 2, 2));
  };

  fill(250);
  auto seg = segment_subflows(flow, 25);
  CHECK(seg.subflows.size() == 10);
  CHECK(seg.dropped_packets == 0);

  fill(24);
  seg = segment_subflows(flow, 25);
  CHECK(seg.subflows.empty());
  CHECK(seg.dropped_packets == 24);

  fill(2070);
  seg = segment_subflows(flow, 1000);
  CHECK(seg.subflows.size() == 2);
  CHECK(seg.dropped_packets == 70);

  CHECK_THROWS_AS(segment_subflows(flow, 1), Error);
}

TEST_CASE("subflows are disjoint, consecutive, and cover the prefix") {
  std::mt19937_64 eng(5);
  Flow flow;
  flow.key = flow_key_of(pkt(0, 1, 1, 2, 2), true);
  std::uint64_t ts = 0;
  for (int i = 0; i < 1037; ++i) {
    ts += eng() % 1000 + 1;
    flow.packets.push_back(pkt(ts, 1, 1, 2, 2));
  }
  auto seg = segment_subflows(flow, 100);
  REQUIRE(seg.subflows.size() == 10);
  std::vector<PacketRecord> rebuilt;
  for (std::size_t i = 0; i < seg.subflows.size(); ++i) {
    CHECK(seg.subflows[i].index == i);
    CHECK(seg.subflows[i].packets.size() == 100);
    rebuilt.insert(rebuilt.end(), seg.subflows[i].packets.begin(),
                   seg.subflows[i].packets.end());
  }
  CHECK(std::equal(rebuilt.begin(), rebuilt.end(), flow.packets.begin()));
}

TEST_CASE("label files round-trip and apply to flows") {
  TempDir tmp;
  PacketRecord a = pkt(0, 0x0A000001, 1, 0x0A000002, 2);
  PacketRecord b = pkt(1, 0x0A000003, 3, 0x0A000004, 4);
  std::vector<std::pair<FlowKey, Label>> labels{
      {flow_key_of(a, true), Label::Known},
      {flow_key_of(b, true), Label::Unknown}};
  write_label_file(labels, tmp.file("labels.txt"));
  auto map = read_label_file(tmp.file("labels.txt"));
  REQUIRE(map.size() == 2);

  std::vector<PacketRecord> recs{a, a, b, b};
  std::sort(recs.begin(), recs.end(),
            [](auto& x, auto& y) { return x.timestamp_us < y.timestamp_us; });
  auto flows = assemble_flows(recs);
  apply_labels(flows, map, true);
  for (const auto& f : flows)
    CHECK(f.label == (f.key == labels[0].first ? Label::Known : Label::Unknown));

  // a flow missing from the map is an error when labels are required
  std::vector<PacketRecord> extra{a, pkt(2, 9, 9, 8, 8)};
  auto flows2 = assemble_flows(extra);
  CHECK_THROWS_AS(apply_labels(flows2, map, true), Error);
  CHECK_NOTHROW(apply_labels(flows2, map, false));
}
