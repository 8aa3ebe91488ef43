#include <gtest/gtest.h>

#include <sstream>

#include "../oracles/flow_oracle.hpp"
#include "test_support.hpp"

using namespace c2flow;
using testing_support::ip;

namespace {

const std::string kHeader = "src_ip,dst_ip,src_port,dst_port,bytes,packets,start_time,end_time,protocol,flags\n";

ParsedFlows parse(const std::string& body) {
  std::istringstream in(kHeader + body);
  return parse_flow_stream(in, FlowSchema::canonical());
}

}  // namespace

TEST(FlowParse, MapsFieldsDirectly) {
  auto p = parse("10.0.0.5,203.0.113.7,50432,443,1500,10,1640995200000,1640995201000,6,S\n");
  ASSERT_EQ(p.records.size(), 1u);
  const auto& r = p.records[0];
  EXPECT_EQ(r.src_ip, ip("10.0.0.5"));
  EXPECT_EQ(r.dst_ip, ip("203.0.113.7"));
  EXPECT_EQ(r.src_port, 50432);
  EXPECT_EQ(r.dst_port, 443);
  EXPECT_EQ(r.bytes, 1500u);
  EXPECT_EQ(r.packets, 10u);
  EXPECT_EQ(r.start_time, 1640995200000);
  EXPECT_EQ(r.end_time, 1640995201000);
  EXPECT_EQ(r.protocol, 6);
  EXPECT_EQ(r.flags, "S");
}

TEST(FlowParse, RejectsEndBeforeStart) {
  auto p = parse("10.0.0.5,203.0.113.7,1,2,100,1,2000,1000,6,\n");
  EXPECT_TRUE(p.records.empty());
  EXPECT_EQ(p.stats.records_rejected, 1u);
  EXPECT_EQ(p.stats.reject_reasons.at("time-order"), 1u);
}

TEST(FlowParse, RejectReasons) {
  auto p = parse(
      "10.0.0.5,not-an-ip,1,2,100,1,0,1,6,\n"
      "10.0.0.5,1.2.3.4,70000,2,100,1,0,1,6,\n"
      "10.0.0.5,1.2.3.4,1,2,5,10,0,1,6,\n"
      "10.0.0.5,1.2.3.4,1,2,5,0,0,1,6,\n"
      "10.0.0.5,1.2.3.4,1,2,5,1,0,1,300,\n"
      "10.0.0.5,1.2.3.4,1,2\n");
  EXPECT_EQ(p.stats.records_rejected, 6u);
  EXPECT_EQ(p.stats.reject_reasons.at("bad-address"), 1u);
  EXPECT_EQ(p.stats.reject_reasons.at("bad-port"), 1u);
  EXPECT_EQ(p.stats.reject_reasons.at("bytes-below-packets"), 1u);
  EXPECT_EQ(p.stats.reject_reasons.at("bad-packets"), 1u);
  EXPECT_EQ(p.stats.reject_reasons.at("bad-protocol"), 1u);
  EXPECT_EQ(p.stats.reject_reasons.at("field-count"), 1u);
}

TEST(FlowParse, PortlessProtocolZeroesPorts) {
  auto p = parse("10.0.0.5,1.2.3.4,8,0,84,1,0,1,1,\n");
  ASSERT_EQ(p.records.size(), 1u);
  EXPECT_EQ(p.records[0].src_port, 0);
  EXPECT_EQ(p.records[0].dst_port, 0);
}

TEST(FlowParse, MissingMappedColumnIsFatalAndNamed) {
  std::istringstream in("src_ip,dst_ip,src_port,dst_port,bytes,start_time,end_time,protocol,flags\n");
  try {
    parse_flow_stream(in, FlowSchema::canonical(), "x.csv");
    FAIL() << "expected an error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("packets"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("x.csv"), std::string::npos);
  }
}

TEST(FlowParse, SchemaRemapsHeadersAndTabs) {
  testing_support::TempDir dir("schema");
  testing_support::write_text(dir.file("schema.conf"), "src_ip = sa\ndst_ip = da\nbytes = octets\n");
  const auto schema = FlowSchema::load(dir.file("schema.conf"));
  std::istringstream in(
      "da\tsa\tsrc_port\tdst_port\toctets\tpackets\tstart_time\tend_time\tprotocol\tflags\n"
      "1.2.3.4\t10.0.0.1\t5\t6\t100\t2\t0\t10\t17\t\n");
  auto p = parse_flow_stream(in, schema);
  ASSERT_EQ(p.records.size(), 1u);
  EXPECT_EQ(p.records[0].src_ip, ip("10.0.0.1"));
  EXPECT_EQ(p.records[0].dst_ip, ip("1.2.3.4"));
  EXPECT_EQ(p.records[0].bytes, 100u);
}

TEST(FlowParse, UnreadableFileIsFatal) { EXPECT_THROW(parse_flow_file("/nonexistent/flows.csv"), Error); }

TEST(FlowParse, ThousandRowsMatchIndependentValidator) {
  auto rng = make_rng(5, {});
  std::vector<std::string> rows;
  for (int i = 0; i < 1000; ++i) {
    const auto bytes = 40 + uniform_index(rng, 5000);
    const auto start = 1'700'000'000'000LL + static_cast<long long>(uniform_index(rng, 86'400'000));
    rows.push_back("10.0." + std::to_string(i % 250) + ".1,198.51.100." + std::to_string(i % 200) + "," +
                   std::to_string(1024 + i) + ",443," + std::to_string(bytes) + ",3," + std::to_string(start) +
                   "," + std::to_string(start + 500) + ",6,PA");
  }
  rows[17] = "10.0.0.1,198.51.100.1,1,443,2,3,0,1,6,";    // bytes < packets
  rows[400] = "10.0.0.1,198.51.100.300,1,443,200,3,0,1,6,";  // bad octet
  rows[999] = "10.0.0.1,198.51.100.1,1,443,200,3,50,1,6,";  // time order
  std::string body;
  for (const auto& r : rows) body += r + "\n";
  const auto p = parse(body);
  std::size_t oracle_ok = 0;
  for (const auto& r : rows) oracle_ok += oracle::valid_flow_line(r);
  EXPECT_EQ(p.stats.records_accepted, 997u);
  EXPECT_EQ(p.stats.records_rejected, 3u);
  EXPECT_EQ(p.stats.records_accepted, oracle_ok);
  EXPECT_EQ(p.stats.lines_read, p.stats.records_accepted + p.stats.records_rejected);
}

TEST(FlowParse, RoundTripsThroughWriter) {
  const auto scenario = [] {
    ScenarioConfig c;
    c.n_benign_hosts = 5;
    c.n_c2_hosts = 2;
    return generate(c);
  }();
  std::ostringstream out;
  write_flows(out, scenario.flows);
  std::istringstream in(out.str());
  const auto p = parse_flow_stream(in, FlowSchema::canonical());
  EXPECT_EQ(p.stats.records_rejected, 0u);
  EXPECT_EQ(p.records, scenario.flows);
}

TEST(FlowParse, BlankLinesSkippedAndStatsMerge) {
  auto a = parse("10.0.0.5,1.2.3.4,1,2,100,1,0,1,6,\n\n   \n");
  EXPECT_EQ(a.stats.lines_read, 1u);
  auto b = parse("bad\n");
  IngestStats merged = a.stats;
  merged += b.stats;
  EXPECT_EQ(merged.lines_read, 2u);
  EXPECT_EQ(merged.records_accepted + merged.records_rejected, merged.lines_read);
}
