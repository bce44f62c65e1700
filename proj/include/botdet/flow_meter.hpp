/* flow_meter.hpp
 *
 * Bidirectional flow assembly and the 44 per-flow statistics. A flow is
 * the set of packets sharing a direction-insensitive
 * <src ip, src port, dst ip, dst port, protocol> tuple. Flows are
 * oriented by endpoint order (forward runs from the smaller (ip, port)
 * endpoint), which keeps the forward/backward feature split stable when
 * a capture is replayed with the endpoints relabeled.
 */
#pragma once

#include <array>
#include <cstdint>
#include <list>
#include <optional>
#include <unordered_map>
#include <vector>

#include "botdet/packet.hpp"

namespace botdet {

// Table order of the emitted features. CSV headers use these spellings.
namespace fidx {
enum : int {
    srcip = 0,
    srcport,
    dstip,
    dstport,
    proto,
    total_fpackets,
    total_fvolume,
    total_bpackets,
    total_bvolume,
    min_fpctl,
    mean_fpctl,
    max_fpctl,
    std_fpctl,
    min_bpctl,
    mean_bpctl,
    max_bpctl,
    std_bpctl,
    min_fiat,
    mean_fiat,
    max_fiat,
    std_fiat,
    min_biat,
    mean_biat,
    max_biat,
    std_biat,
    duration,
    min_active,
    mean_active,
    max_active,
    std_active,
    min_idle,
    mean_idle,
    max_idle,
    std_idle,
    sflow_fpackets,
    sflow_fbytes,
    sflow_bpackets,
    sflow_bbytes,
    fpsh_cnt,
    bpsh_cnt,
    fiurg_cnt,
    burg_cnt,
    total_fhlen,
    total_bhlen,
};
}  // namespace fidx

inline constexpr int kFeatureCount = 44;

const std::array<const char*, kFeatureCount>& feature_names();

struct FeatureVector {
    std::array<double, kFeatureCount> values{};
    int64_t first_ts_us = 0;
    int64_t last_ts_us = 0;
    std::optional<int> label;  // 0 = nonmalicious, 1 = malicious
    // indices of the flow's packets in the capture, when tracking is on
    std::vector<uint64_t> packet_indices;

    double operator[](int i) const { return values[static_cast<size_t>(i)]; }
};

struct FlowKey {
    uint32_t src_ip = 0;
    uint16_t src_port = 0;
    uint32_t dst_ip = 0;
    uint16_t dst_port = 0;
    uint8_t protocol = 0;

    bool operator==(const FlowKey&) const = default;
    // same key irrespective of direction
    FlowKey canonical() const;
};

struct FlowKeyHash {
    size_t operator()(const FlowKey& k) const;
};

struct MeterConfig {
    int64_t activity_threshold_us = 1'000'000;    // gap > threshold splits active periods
    int64_t idle_timeout_us = 600'000'000;        // flow expiry
    int64_t ooo_tolerance_us = 1'000;             // silent clamp window for reordering
    int64_t max_flow_age_us = 0;                  // 0 = unlimited; detect mode caps flow life
    bool track_packet_indices = false;
};

// Running accumulators for one live flow.
struct FlowState {
    FlowKey key;  // canonical orientation: src = smaller (ip, port) endpoint
    int64_t first_ts_us = 0;
    int64_t last_ts_us = 0;

    struct DirStats {
        int64_t packets = 0;
        int64_t bytes = 0;       // sum of ip_total_len
        int64_t header_bytes = 0;
        int64_t len_min = 0, len_max = 0, len_sum = 0;
        __int128 len_sumsq = 0;
        int64_t iat_count = 0;
        int64_t iat_min = 0, iat_max = 0, iat_sum = 0;
        __int128 iat_sumsq = 0;
        int64_t last_ts_us = 0;
        int64_t psh = 0;
        int64_t urg = 0;
        bool fin_seen = false;
    };
    DirStats fwd, bwd;

    int64_t active_start_us = 0;
    int64_t active_count = 0;
    int64_t active_min = 0, active_max = 0, active_sum = 0;
    __int128 active_sumsq = 0;
    int64_t idle_count = 0;
    int64_t idle_min = 0, idle_max = 0, idle_sum = 0;
    __int128 idle_sumsq = 0;
    int64_t subflows = 0;

    bool rst_seen = false;
    uint64_t serial = 0;  // creation order, unique per table
    std::vector<uint64_t> packet_indices;

    void add(const PacketRecord& pkt, int64_t activity_threshold_us);
};

FeatureVector finalize(const FlowState& state);

// Single-writer flow table. ingest() returns flows completed by this
// packet's arrival (TCP termination or idle/age expiry).
class FlowTable {
public:
    explicit FlowTable(MeterConfig cfg = {});

    std::vector<FeatureVector> ingest(const PacketRecord& pkt,
                                      std::optional<uint64_t> packet_index = std::nullopt);
    std::vector<FeatureVector> flush();

    size_t size() const { return flows_.size(); }
    uint64_t ooo_warnings() const { return ooo_warnings_; }
    const MeterConfig& config() const { return cfg_; }

private:
    struct Entry {
        FlowState state;
        std::list<FlowKey>::iterator lru_pos;
    };

    void expire_into(int64_t now_us, std::vector<FeatureVector>& out);
    FeatureVector remove(const FlowKey& canon);

    MeterConfig cfg_;
    std::unordered_map<FlowKey, Entry, FlowKeyHash> flows_;  // keyed by canonical key
    std::list<FlowKey> lru_;          // canonical keys, least-recently-active first
    std::list<std::pair<uint64_t, FlowKey>> by_age_;  // (serial, canonical key) in creation order
    uint64_t next_serial_ = 1;
    int64_t last_seen_ts_us_ = 0;
    uint64_t ooo_warnings_ = 0;
};

}  // namespace botdet
