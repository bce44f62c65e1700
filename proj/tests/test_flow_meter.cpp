#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "botdet/flow_meter.hpp"
#include "botdet/packet.hpp"
#include "botdet/pcap_io.hpp"
#include "oracle.hpp"
#include "testutil.hpp"

using namespace botdet;
using testutil::build_frame;
using testutil::make_packet;

namespace {

void check_against_oracle(const FeatureVector& got, const FeatureVector& want) {
    const auto& ints = oracle::integer_features();
    for (int i = 0; i < kFeatureCount; ++i) {
        INFO("feature ", feature_names()[static_cast<size_t>(i)]);
        bool integer = std::find(ints.begin(), ints.end(), i) != ints.end();
        if (integer) {
            CHECK(got[i] == want[i]);
        } else if (want[i] == 0.0) {
            CHECK(got[i] == 0.0);
        } else {
            CHECK(std::fabs(got[i] - want[i]) / std::fabs(want[i]) < 1e-9);
        }
    }
}

}  // namespace

TEST_CASE("parse_packet decodes a hand-built UDP frame") {
    // 10 payload bytes: ip_total_len = 20 + 8 + 10 = 38, frame padded to 60
    PacketRecord spec = make_packet(7, 0x0a000001, 5000, 0x0a000002, 6000, kProtoUdp, 38);
    RawFrame f = build_frame(spec);
    f.data.resize(60, 0);  // Ethernet minimum-frame padding
    ParseResult r = parse_packet(f.data, kLinkEthernet, 7);
    REQUIRE(r.status == ParseStatus::ok);
    CHECK(r.record.protocol == 17);
    CHECK(r.record.transport_header_len == 8);
    CHECK(r.record.ip_total_len == 38);
    CHECK(r.record.ip_header_len == 20);
    CHECK(r.record.src_ip == 0x0a000001);
    CHECK(r.record.src_port == 5000);
    CHECK(r.record.dst_ip == 0x0a000002);
    CHECK(r.record.dst_port == 6000);
    CHECK(r.record.ts_us == 7);
}

TEST_CASE("parse_packet decodes TCP flags") {
    PacketRecord spec = make_packet(0, 1, 80, 2, 81, kProtoTcp, 40,
                                    kFlagSyn | kFlagPsh | kFlagUrg);
    RawFrame f = build_frame(spec);
    ParseResult r = parse_packet(f.data, kLinkEthernet, 0);
    REQUIRE(r.status == ParseStatus::ok);
    CHECK(r.record.transport_header_len == 20);
    CHECK((r.record.flags & kFlagSyn) != 0);
    CHECK((r.record.flags & kFlagPsh) != 0);
    CHECK((r.record.flags & kFlagUrg) != 0);
    CHECK((r.record.flags & kFlagFin) == 0);
}

TEST_CASE("parse_packet skips non-TCP/UDP and non-IPv4") {
    PacketRecord spec = make_packet(0, 1, 0, 2, 0, kProtoUdp, 38);
    RawFrame f = build_frame(spec);
    f.data[14 + 9] = 1;  // ICMP
    CHECK(parse_packet(f.data, kLinkEthernet, 0).status == ParseStatus::skip);

    RawFrame g = build_frame(spec);
    g.data[12] = 0x86;
    g.data[13] = 0xdd;  // IPv6 ethertype
    CHECK(parse_packet(g.data, kLinkEthernet, 0).status == ParseStatus::skip);

    RawFrame h = build_frame(spec);
    h.data[12] = 0x08;
    h.data[13] = 0x06;  // ARP
    CHECK(parse_packet(h.data, kLinkEthernet, 0).status == ParseStatus::skip);
}

TEST_CASE("parse_packet truncation and malformed errors") {
    std::vector<uint8_t> tiny(10, 0);
    CHECK(parse_packet(tiny, kLinkEthernet, 0).status == ParseStatus::truncated);

    PacketRecord spec = make_packet(0, 1, 5000, 2, 6000, kProtoUdp, 38);
    RawFrame f = build_frame(spec);
    f.data[14] = 0x4f;  // ihl = 60 bytes, beyond the captured frame
    CHECK(parse_packet(f.data, kLinkEthernet, 0).status == ParseStatus::malformed);

    // declared IP total length smaller than its own headers
    RawFrame g = build_frame(spec);
    g.data[14 + 2] = 0;
    g.data[14 + 3] = 20;
    CHECK(parse_packet(g.data, kLinkEthernet, 0).status == ParseStatus::malformed);
}

TEST_CASE("parse_packet steps over 802.1Q tags") {
    PacketRecord spec = make_packet(0, 0x01020304, 1111, 0x05060708, 2222, kProtoUdp, 38);
    RawFrame f = build_frame(spec);
    std::vector<uint8_t> tagged(f.data.begin(), f.data.begin() + 12);
    tagged.push_back(0x81);
    tagged.push_back(0x00);
    tagged.push_back(0x00);
    tagged.push_back(0x2a);  // VLAN 42
    tagged.insert(tagged.end(), f.data.begin() + 12, f.data.end());
    ParseResult r = parse_packet(tagged, kLinkEthernet, 0);
    REQUIRE(r.status == ParseStatus::ok);
    CHECK(r.record.src_ip == 0x01020304);
    CHECK(r.record.dst_port == 2222);
}

TEST_CASE("parse_packet raw-IP link type") {
    PacketRecord spec = make_packet(0, 1, 53, 2, 53, kProtoUdp, 38);
    RawFrame f = build_frame(spec);
    std::vector<uint8_t> raw(f.data.begin() + 14, f.data.end());
    ParseResult r = parse_packet(raw, kLinkRawIp, 0);
    REQUIRE(r.status == ParseStatus::ok);
    CHECK(r.record.src_port == 53);
}

TEST_CASE("pcap round trip preserves frames and timestamps") {
    testutil::TempDir tmp("pcap_rt");
    std::vector<PacketRecord> pkts = {
        make_packet(1'000'001, 1, 10, 2, 20, kProtoUdp, 100),
        make_packet(2'000'002, 3, 30, 4, 40, kProtoUdp, 200),
        make_packet(3'999'999, 5, 50, 6, 60, kProtoTcp, 300),
    };
    testutil::write_pcap(tmp.file("a.pcap"), pkts);

    PcapReader rd(tmp.file("a.pcap"));
    CHECK(rd.link_type() == kLinkEthernet);
    RawFrame fr;
    size_t n = 0;
    while (rd.next(fr)) {
        CHECK(fr.ts_us == pkts[n].ts_us);
        CHECK(fr.data == build_frame(pkts[n]).data);
        ++n;
    }
    CHECK(n == 3);
}

TEST_CASE("pcap with zero records yields an empty stream") {
    testutil::TempDir tmp("pcap_empty");
    { PcapWriter w(tmp.file("e.pcap"), kLinkEthernet); }
    PcapReader rd(tmp.file("e.pcap"));
    RawFrame fr;
    CHECK_FALSE(rd.next(fr));
}

namespace {

void put32be(std::ofstream& o, uint32_t v) {
    char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 8), static_cast<char>(v)};
    o.write(b, 4);
}

}  // namespace

TEST_CASE("byte-swapped pcap reads identically to native order") {
    testutil::TempDir tmp("pcap_swap");
    std::vector<PacketRecord> pkts = {
        make_packet(5'000'123, 9, 90, 8, 80, kProtoUdp, 50),
        make_packet(6'500'456, 7, 70, 6, 60, kProtoUdp, 60),
    };
    testutil::write_pcap(tmp.file("native.pcap"), pkts);
    {
        // big-endian variant of the same capture, written by hand
        std::ofstream o(tmp.file("swapped.pcap"), std::ios::binary);
        put32be(o, 0xa1b2c3d4);
        o.put(0).put(2).put(0).put(4);
        put32be(o, 0);
        put32be(o, 0);
        put32be(o, 262144);
        put32be(o, 1);
        for (const auto& p : pkts) {
            RawFrame f = build_frame(p);
            put32be(o, static_cast<uint32_t>(p.ts_us / 1000000));
            put32be(o, static_cast<uint32_t>(p.ts_us % 1000000));
            put32be(o, static_cast<uint32_t>(f.data.size()));
            put32be(o, static_cast<uint32_t>(f.data.size()));
            o.write(reinterpret_cast<const char*>(f.data.data()),
                    static_cast<std::streamsize>(f.data.size()));
        }
    }
    PcapReader a(tmp.file("native.pcap"));
    PcapReader b(tmp.file("swapped.pcap"));
    RawFrame fa, fb;
    while (true) {
        bool ga = a.next(fa), gb = b.next(fb);
        CHECK(ga == gb);
        if (!ga) break;
        CHECK(fa.ts_us == fb.ts_us);
        CHECK(fa.data == fb.data);
    }
}

TEST_CASE("pcap bad magic and truncated record") {
    testutil::TempDir tmp("pcap_bad");
    {
        std::ofstream o(tmp.file("bad.pcap"), std::ios::binary);
        for (int i = 0; i < 24; ++i) o.put(static_cast<char>(i));
    }
    CHECK_THROWS_AS(PcapReader(tmp.file("bad.pcap")), pcap_bad_magic);

    std::vector<PacketRecord> pkts = {make_packet(1, 1, 1, 2, 2, kProtoUdp, 40),
                                      make_packet(2, 3, 3, 4, 4, kProtoUdp, 40)};
    testutil::write_pcap(tmp.file("t.pcap"), pkts);
    // chop the final record body short
    auto size = std::filesystem::file_size(tmp.file("t.pcap"));
    std::filesystem::resize_file(tmp.file("t.pcap"), size - 5);
    PcapReader rd(tmp.file("t.pcap"));
    RawFrame fr;
    CHECK(rd.next(fr));  // first record intact
    CHECK_THROWS_AS(rd.next(fr), pcap_truncated_record);
}

TEST_CASE("ingest: single packet opens a flow and returns nothing") {
    FlowTable table;
    auto done = table.ingest(make_packet(0, 1, 10, 2, 20, kProtoUdp, 100));
    CHECK(done.empty());
    CHECK(table.size() == 1);
}

TEST_CASE("ingest: three forward UDP packets match the hand computation") {
    FlowTable table;
    table.ingest(make_packet(0, 1, 10, 2, 20, kProtoUdp, 100));
    table.ingest(make_packet(100'000, 1, 10, 2, 20, kProtoUdp, 200));
    table.ingest(make_packet(300'000, 1, 10, 2, 20, kProtoUdp, 300));
    auto flows = table.flush();
    REQUIRE(flows.size() == 1);
    const FeatureVector& fv = flows[0];
    CHECK(fv[fidx::total_fpackets] == 3);
    CHECK(fv[fidx::total_fvolume] == 600);
    CHECK(fv[fidx::min_fiat] == 100'000);
    CHECK(fv[fidx::mean_fiat] == 150'000);
    CHECK(fv[fidx::max_fiat] == 200'000);
    CHECK(fv[fidx::min_fpctl] == 100);
    CHECK(fv[fidx::mean_fpctl] == 200);
    CHECK(fv[fidx::max_fpctl] == 300);
    CHECK(fv[fidx::duration] == 300'000);
    CHECK(fv[fidx::total_bpackets] == 0);
    CHECK(fv[fidx::min_biat] == 0);
    // one uninterrupted active period: active = duration, idle empty
    CHECK(fv[fidx::min_active] == 300'000);
    CHECK(fv[fidx::mean_active] == 300'000);
    CHECK(fv[fidx::max_active] == 300'000);
    CHECK(fv[fidx::max_idle] == 0);
}

TEST_CASE("ingest: reply packets map to the same flow, direction-insensitive") {
    FlowTable table;
    table.ingest(make_packet(0, 1, 10, 2, 20, kProtoUdp, 100));
    table.ingest(make_packet(50, 2, 20, 1, 10, kProtoUdp, 60));
    CHECK(table.size() == 1);
    auto flows = table.flush();
    REQUIRE(flows.size() == 1);
    CHECK(flows[0][fidx::total_fpackets] == 1);
    CHECK(flows[0][fidx::total_bpackets] == 1);
    CHECK(flows[0][fidx::srcip] == 1);  // canonical endpoint order
    CHECK(flows[0][fidx::total_bvolume] == 60);
}

TEST_CASE("TCP flow finalizes on the second FIN") {
    FlowTable table;
    table.ingest(make_packet(0, 1, 10, 2, 20, kProtoTcp, 40, kFlagSyn));
    table.ingest(make_packet(10, 2, 20, 1, 10, kProtoTcp, 40, kFlagSyn));
    auto d1 = table.ingest(make_packet(20, 1, 10, 2, 20, kProtoTcp, 40, kFlagFin));
    CHECK(d1.empty());
    auto d2 = table.ingest(make_packet(30, 2, 20, 1, 10, kProtoTcp, 40, kFlagFin));
    REQUIRE(d2.size() == 1);
    CHECK(table.size() == 0);
    CHECK(d2[0][fidx::total_fpackets] + d2[0][fidx::total_bpackets] == 4);
}

TEST_CASE("TCP flow finalizes on RST") {
    FlowTable table;
    table.ingest(make_packet(0, 1, 10, 2, 20, kProtoTcp, 40, kFlagSyn));
    auto done = table.ingest(make_packet(10, 1, 10, 2, 20, kProtoTcp, 40, kFlagRst));
    REQUIRE(done.size() == 1);
    CHECK(table.size() == 0);
}

TEST_CASE("idle flows expire relative to the arriving packet") {
    MeterConfig cfg;
    cfg.idle_timeout_us = 1'000'000;
    FlowTable table(cfg);
    table.ingest(make_packet(0, 1, 10, 2, 20, kProtoUdp, 100));
    // unrelated packet far in the future expires the first flow
    auto done = table.ingest(make_packet(2'000'000, 9, 90, 8, 80, kProtoUdp, 50));
    REQUIRE(done.size() == 1);
    CHECK(done[0][fidx::srcip] == 1);
    CHECK(table.size() == 1);
}

TEST_CASE("finalize: one-packet flow degenerates to zeros") {
    FlowTable table;
    table.ingest(make_packet(42, 1, 10, 2, 20, kProtoUdp, 100));
    auto flows = table.flush();
    REQUIRE(flows.size() == 1);
    const FeatureVector& fv = flows[0];
    CHECK(fv[fidx::duration] == 0);
    CHECK(fv[fidx::min_fiat] == 0);
    CHECK(fv[fidx::mean_fiat] == 0);
    CHECK(fv[fidx::std_fpctl] == 0);
    CHECK(fv[fidx::sflow_fpackets] == 1);  // one packet, one sub-flow
    CHECK(fv[fidx::min_active] == 0);
    CHECK(fv[fidx::mean_active] == 0);
}

TEST_CASE("finalize: sample standard deviation of two lengths") {
    FlowTable table;
    table.ingest(make_packet(0, 1, 10, 2, 20, kProtoUdp, 100));
    table.ingest(make_packet(10, 1, 10, 2, 20, kProtoUdp, 300));
    auto flows = table.flush();
    REQUIRE(flows.size() == 1);
    CHECK(flows[0][fidx::mean_fpctl] == 200);
    CHECK(flows[0][fidx::std_fpctl] == doctest::Approx(141.4213562373095).epsilon(1e-12));
}

TEST_CASE("activity split: one 5s gap yields 2 sub-flows and one idle period") {
    MeterConfig cfg;
    cfg.activity_threshold_us = 1'000'000;
    FlowTable table(cfg);
    table.ingest(make_packet(0, 1, 10, 2, 20, kProtoUdp, 100));
    table.ingest(make_packet(100'000, 1, 10, 2, 20, kProtoUdp, 100));
    table.ingest(make_packet(5'100'000, 1, 10, 2, 20, kProtoUdp, 100));
    auto flows = table.flush();
    REQUIRE(flows.size() == 1);
    const FeatureVector& fv = flows[0];
    CHECK(fv[fidx::min_idle] == 5'000'000);
    CHECK(fv[fidx::max_idle] == 5'000'000);
    CHECK(fv[fidx::sflow_fpackets] == doctest::Approx(1.5));  // 3 packets / 2 sub-flows
    // active periods: [0, 100ms] and [5.1s, 5.1s]
    CHECK(fv[fidx::min_active] == 0);
    CHECK(fv[fidx::max_active] == 100'000);
    CHECK(fv[fidx::duration] == 5'100'000);
}

TEST_CASE("gap exactly at the threshold does not split") {
    MeterConfig cfg;
    cfg.activity_threshold_us = 1'000'000;
    FlowTable table(cfg);
    table.ingest(make_packet(0, 1, 10, 2, 20, kProtoUdp, 100));
    table.ingest(make_packet(1'000'000, 1, 10, 2, 20, kProtoUdp, 100));
    auto flows = table.flush();
    CHECK(flows[0][fidx::max_idle] == 0);
    CHECK(flows[0][fidx::sflow_fpackets] == 2);
}

TEST_CASE("flush returns every live flow and empties the table") {
    FlowTable table;
    table.ingest(make_packet(0, 1, 10, 2, 20, kProtoUdp, 100));
    table.ingest(make_packet(10, 3, 30, 4, 40, kProtoUdp, 100));
    auto flows = table.flush();
    CHECK(flows.size() == 2);
    CHECK(table.size() == 0);
    CHECK(table.flush().empty());
}

TEST_CASE("out-of-order timestamps clamp to zero gaps; large regressions warn") {
    FlowTable table;  // default tolerance 1 ms
    table.ingest(make_packet(1'000'000, 1, 10, 2, 20, kProtoUdp, 100));
    table.ingest(make_packet(999'500, 1, 10, 2, 20, kProtoUdp, 100));  // within tolerance
    CHECK(table.ooo_warnings() == 0);
    table.ingest(make_packet(200'000, 1, 10, 2, 20, kProtoUdp, 100));  // way out of order
    CHECK(table.ooo_warnings() == 1);
    auto flows = table.flush();
    REQUIRE(flows.size() == 1);
    CHECK(flows[0][fidx::total_fpackets] == 3);  // still processed
    CHECK(flows[0][fidx::min_fiat] == 0);        // clamped
    CHECK(flows[0][fidx::duration] == 0);
}

TEST_CASE("direction symmetry: swapped replay swaps every f/b pair") {
    auto flows = testutil::make_mixed_flows(77, 100, testutil::benign_shape(),
                                            testutil::malicious_shape());
    auto pkts = testutil::interleave(flows);

    FlowTable t1, t2;
    std::vector<FeatureVector> out1, out2;
    auto drain = [](std::vector<FeatureVector>&& v, std::vector<FeatureVector>& out) {
        for (auto& fv : v) out.push_back(std::move(fv));
    };
    for (const auto& p : pkts) {
        drain(t1.ingest(p), out1);
        PacketRecord q = p;
        std::swap(q.src_ip, q.dst_ip);
        std::swap(q.src_port, q.dst_port);
        drain(t2.ingest(q), out2);
    }
    drain(t1.flush(), out1);
    drain(t2.flush(), out2);
    REQUIRE(out1.size() == out2.size());
    REQUIRE(out1.size() >= 100);

    const std::pair<int, int> swapped[] = {
        {fidx::total_fpackets, fidx::total_bpackets},
        {fidx::total_fvolume, fidx::total_bvolume},
        {fidx::min_fpctl, fidx::min_bpctl},
        {fidx::mean_fpctl, fidx::mean_bpctl},
        {fidx::max_fpctl, fidx::max_bpctl},
        {fidx::std_fpctl, fidx::std_bpctl},
        {fidx::min_fiat, fidx::min_biat},
        {fidx::mean_fiat, fidx::mean_biat},
        {fidx::max_fiat, fidx::max_biat},
        {fidx::std_fiat, fidx::std_biat},
        {fidx::sflow_fpackets, fidx::sflow_bpackets},
        {fidx::sflow_fbytes, fidx::sflow_bbytes},
        {fidx::fpsh_cnt, fidx::bpsh_cnt},
        {fidx::fiurg_cnt, fidx::burg_cnt},
        {fidx::total_fhlen, fidx::total_bhlen},
    };
    // the canonical key names the same endpoint pair either way
    const int unchanged[] = {fidx::srcip,       fidx::srcport,    fidx::dstip,
                             fidx::dstport,     fidx::proto,      fidx::duration,
                             fidx::min_active,  fidx::mean_active, fidx::max_active,
                             fidx::std_active,  fidx::min_idle,   fidx::mean_idle,
                             fidx::max_idle,    fidx::std_idle};
    for (size_t i = 0; i < out1.size(); ++i) {
        for (auto [a, b] : swapped) {
            CHECK(out1[i][a] == out2[i][b]);
            CHECK(out1[i][b] == out2[i][a]);
        }
        for (int a : unchanged) CHECK(out1[i][a] == out2[i][a]);
    }
}

TEST_CASE("conservation: packet and volume sums survive flow assembly") {
    auto flows = testutil::make_mixed_flows(123, 60, testutil::benign_shape(),
                                            testutil::malicious_shape());
    auto pkts = testutil::interleave(flows);
    double total_len = 0;
    for (const auto& p : pkts) total_len += p.ip_total_len;

    FlowTable table;
    std::vector<FeatureVector> out;
    for (const auto& p : pkts)
        for (auto& fv : table.ingest(p)) out.push_back(std::move(fv));
    for (auto& fv : table.flush()) out.push_back(std::move(fv));

    double pkt_sum = 0, vol_sum = 0;
    for (const auto& fv : out) {
        pkt_sum += fv[fidx::total_fpackets] + fv[fidx::total_bpackets];
        vol_sum += fv[fidx::total_fvolume] + fv[fidx::total_bvolume];
    }
    CHECK(pkt_sum == static_cast<double>(pkts.size()));
    CHECK(vol_sum == total_len);
}

TEST_CASE("packet-length statistics are permutation invariant") {
    std::mt19937_64 rng(5);
    std::vector<uint32_t> lens;
    for (int i = 0; i < 20; ++i)
        lens.push_back(static_cast<uint32_t>(testutil::uniform(rng, 40, 1400)));

    auto run = [&](const std::vector<uint32_t>& order) {
        FlowTable table;
        int64_t t = 0;
        for (uint32_t len : order) {
            table.ingest(make_packet(t, 1, 10, 2, 20, kProtoUdp, len));
            t += 1000;
        }
        return table.flush()[0];
    };
    FeatureVector a = run(lens);
    std::vector<uint32_t> shuffled = lens;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    FeatureVector b = run(shuffled);
    for (int i : {fidx::min_fpctl, fidx::mean_fpctl, fidx::max_fpctl, fidx::std_fpctl})
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("random flows match the store-all-packets oracle") {
    std::mt19937_64 rng(2024);
    MeterConfig cfg;
    for (int trial = 0; trial < 60; ++trial) {
        bool mal = trial % 2 == 0;
        bool tcp = trial % 3 == 0;
        testutil::FlowShape shape = mal ? testutil::malicious_shape() : testutil::benign_shape();
        // stretch some IATs across the activity threshold to exercise idle logic
        if (trial % 5 == 0) shape.iat_hi_us = 3'000'000;
        shape.pkts_hi = 50;
        testutil::SynthFlow fl =
            make_flow(rng, shape, static_cast<uint32_t>(trial + 1), 1'000'000, mal ? 1 : 0, tcp);

        FlowTable table(cfg);
        std::vector<FeatureVector> out;
        for (const auto& p : fl.packets)
            for (auto& fv : table.ingest(p)) out.push_back(std::move(fv));
        for (auto& fv : table.flush()) out.push_back(std::move(fv));
        REQUIRE(out.size() == 1);

        FeatureVector want = oracle::flow_features(fl.packets, cfg.activity_threshold_us);
        check_against_oracle(out[0], want);
    }
}

TEST_CASE("active plus idle time accounts for the whole duration, exactly") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        testutil::FlowShape shape = testutil::benign_shape();
        shape.iat_hi_us = 2'500'000;  // force idle periods
        shape.backward_prob = 0;
        auto fl = make_flow(rng, shape, static_cast<uint32_t>(trial + 1), 0, 0, false);
        FlowTable table;
        for (const auto& p : fl.packets) table.ingest(p);
        auto flows = table.flush();
        REQUIRE(flows.size() == 1);
        const FeatureVector& fv = flows[0];
        // sub-flow count recovered from the per-sub-flow packet average
        double subflows = fv[fidx::total_fpackets] / fv[fidx::sflow_fpackets];
        double active_total = fv[fidx::mean_active] * subflows;
        double idle_total = subflows > 1 ? fv[fidx::mean_idle] * (subflows - 1) : 0.0;
        CHECK(active_total + idle_total == doctest::Approx(fv[fidx::duration]).epsilon(1e-9));
    }
}
