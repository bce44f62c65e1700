#include "botdet/flow_meter.hpp"

#include <algorithm>
#include <cmath>

namespace botdet {

const std::array<const char*, kFeatureCount>& feature_names() {
    static const std::array<const char*, kFeatureCount> names = {
        "srcip",          "srcport",        "dstip",          "dstport",
        "proto",          "total_fpackets", "total_fvolume",  "total_bpackets",
        "total_bvolume",  "min_fpctl",      "mean_fpctl",     "max_fpctl",
        "std_fpctl",      "min_bpctl",      "mean_bpctl",     "max_bpctl",
        "std_bpctl",      "min_fiat",       "mean_fiat",      "max_fiat",
        "std_fiat",       "min_biat",       "mean_biat",      "max_biat",
        "std_biat",       "duration",       "min_active",     "mean_active",
        "max_active",     "std_active",     "min_idle",       "mean_idle",
        "max_idle",       "std_idle",       "sflow_fpackets", "sflow_fbytes",
        "sflow_bpackets", "sflow_bbytes",   "fpsh_cnt",       "bpsh_cnt",
        "fiurg_cnt",      "burg_cnt",       "total_fhlen",    "total_bhlen",
    };
    return names;
}

FlowKey FlowKey::canonical() const {
    FlowKey k = *this;
    if (std::tie(k.src_ip, k.src_port) > std::tie(k.dst_ip, k.dst_port)) {
        std::swap(k.src_ip, k.dst_ip);
        std::swap(k.src_port, k.dst_port);
    }
    return k;
}

size_t FlowKeyHash::operator()(const FlowKey& k) const {
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&h](uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(k.src_ip, 4);
    mix(k.src_port, 2);
    mix(k.dst_ip, 4);
    mix(k.dst_port, 2);
    mix(k.protocol, 1);
    return static_cast<size_t>(h);
}

namespace {

void dir_add_length(FlowState::DirStats& d, int64_t len) {
    if (d.packets == 0) {
        d.len_min = d.len_max = len;
    } else {
        d.len_min = std::min(d.len_min, len);
        d.len_max = std::max(d.len_max, len);
    }
    d.len_sum += len;
    d.len_sumsq += static_cast<__int128>(len) * len;
}

void dir_add_iat(FlowState::DirStats& d, int64_t iat) {
    if (d.iat_count == 0) {
        d.iat_min = d.iat_max = iat;
    } else {
        d.iat_min = std::min(d.iat_min, iat);
        d.iat_max = std::max(d.iat_max, iat);
    }
    d.iat_sum += iat;
    d.iat_sumsq += static_cast<__int128>(iat) * iat;
    ++d.iat_count;
}

struct GroupStats {
    double min = 0, mean = 0, max = 0, stdev = 0;
};

GroupStats group_stats(int64_t n, int64_t mn, int64_t mx, int64_t sum, __int128 sumsq) {
    GroupStats g;
    if (n <= 0) return g;
    g.min = static_cast<double>(mn);
    g.max = static_cast<double>(mx);
    g.mean = static_cast<double>(sum) / static_cast<double>(n);
    if (n >= 2) {
        // n*sumsq - sum^2 is exact in 128-bit; convert at the end
        __int128 num = static_cast<__int128>(n) * sumsq - static_cast<__int128>(sum) * sum;
        if (num < 0) num = 0;  // guards rounding at num == 0
        double var = static_cast<double>(num) / (static_cast<double>(n) * static_cast<double>(n - 1));
        g.stdev = std::sqrt(var);
    }
    return g;
}

}  // namespace

void FlowState::add(const PacketRecord& pkt, int64_t activity_threshold_us) {
    bool forward = (pkt.src_ip == key.src_ip && pkt.src_port == key.src_port &&
                    pkt.dst_ip == key.dst_ip && pkt.dst_port == key.dst_port);
    DirStats& d = forward ? fwd : bwd;

    // per-flow monotone clock: regressions count as zero gaps
    int64_t t = std::max(pkt.ts_us, last_ts_us);

    if (fwd.packets + bwd.packets > 0) {
        int64_t gap = t - last_ts_us;
        if (gap > activity_threshold_us) {
            int64_t active = last_ts_us - active_start_us;
            if (active_count == 0) {
                active_min = active_max = active;
            } else {
                active_min = std::min(active_min, active);
                active_max = std::max(active_max, active);
            }
            active_sum += active;
            active_sumsq += static_cast<__int128>(active) * active;
            ++active_count;
            if (idle_count == 0) {
                idle_min = idle_max = gap;
            } else {
                idle_min = std::min(idle_min, gap);
                idle_max = std::max(idle_max, gap);
            }
            idle_sum += gap;
            idle_sumsq += static_cast<__int128>(gap) * gap;
            ++idle_count;
            active_start_us = t;
            ++subflows;
        }
        if (d.packets > 0) dir_add_iat(d, t - d.last_ts_us);
    }

    dir_add_length(d, static_cast<int64_t>(pkt.ip_total_len));
    d.bytes += pkt.ip_total_len;
    d.header_bytes += static_cast<int64_t>(pkt.ip_header_len) + pkt.transport_header_len;
    ++d.packets;
    d.last_ts_us = t;
    if (pkt.flags & kFlagPsh) ++d.psh;
    if (pkt.flags & kFlagUrg) ++d.urg;
    if (pkt.flags & kFlagFin) d.fin_seen = true;
    if (pkt.flags & kFlagRst) rst_seen = true;
    last_ts_us = t;
}

FeatureVector finalize(const FlowState& state) {
    FeatureVector fv;
    auto& v = fv.values;
    fv.first_ts_us = state.first_ts_us;
    fv.last_ts_us = state.last_ts_us;
    fv.packet_indices = state.packet_indices;

    v[fidx::srcip] = static_cast<double>(state.key.src_ip);
    v[fidx::srcport] = state.key.src_port;
    v[fidx::dstip] = static_cast<double>(state.key.dst_ip);
    v[fidx::dstport] = state.key.dst_port;
    v[fidx::proto] = state.key.protocol;

    const auto& f = state.fwd;
    const auto& b = state.bwd;
    v[fidx::total_fpackets] = static_cast<double>(f.packets);
    v[fidx::total_fvolume] = static_cast<double>(f.bytes);
    v[fidx::total_bpackets] = static_cast<double>(b.packets);
    v[fidx::total_bvolume] = static_cast<double>(b.bytes);

    GroupStats fl = group_stats(f.packets, f.len_min, f.len_max, f.len_sum, f.len_sumsq);
    v[fidx::min_fpctl] = fl.min;
    v[fidx::mean_fpctl] = fl.mean;
    v[fidx::max_fpctl] = fl.max;
    v[fidx::std_fpctl] = fl.stdev;
    GroupStats bl = group_stats(b.packets, b.len_min, b.len_max, b.len_sum, b.len_sumsq);
    v[fidx::min_bpctl] = bl.min;
    v[fidx::mean_bpctl] = bl.mean;
    v[fidx::max_bpctl] = bl.max;
    v[fidx::std_bpctl] = bl.stdev;

    GroupStats fi = group_stats(f.iat_count, f.iat_min, f.iat_max, f.iat_sum, f.iat_sumsq);
    v[fidx::min_fiat] = fi.min;
    v[fidx::mean_fiat] = fi.mean;
    v[fidx::max_fiat] = fi.max;
    v[fidx::std_fiat] = fi.stdev;
    GroupStats bi = group_stats(b.iat_count, b.iat_min, b.iat_max, b.iat_sum, b.iat_sumsq);
    v[fidx::min_biat] = bi.min;
    v[fidx::mean_biat] = bi.mean;
    v[fidx::max_biat] = bi.max;
    v[fidx::std_biat] = bi.stdev;

    v[fidx::duration] = static_cast<double>(state.last_ts_us - state.first_ts_us);

    // close the trailing active period
    int64_t final_active = state.last_ts_us - state.active_start_us;
    int64_t a_n = state.active_count + 1;
    int64_t a_min = state.active_count == 0 ? final_active : std::min(state.active_min, final_active);
    int64_t a_max = state.active_count == 0 ? final_active : std::max(state.active_max, final_active);
    int64_t a_sum = state.active_sum + final_active;
    __int128 a_sumsq = state.active_sumsq + static_cast<__int128>(final_active) * final_active;
    GroupStats ac = group_stats(a_n, a_min, a_max, a_sum, a_sumsq);
    v[fidx::min_active] = ac.min;
    v[fidx::mean_active] = ac.mean;
    v[fidx::max_active] = ac.max;
    v[fidx::std_active] = ac.stdev;

    GroupStats id = group_stats(state.idle_count, state.idle_min, state.idle_max, state.idle_sum,
                                state.idle_sumsq);
    v[fidx::min_idle] = id.min;
    v[fidx::mean_idle] = id.mean;
    v[fidx::max_idle] = id.max;
    v[fidx::std_idle] = id.stdev;

    double sf = static_cast<double>(state.subflows);
    v[fidx::sflow_fpackets] = static_cast<double>(f.packets) / sf;
    v[fidx::sflow_fbytes] = static_cast<double>(f.bytes) / sf;
    v[fidx::sflow_bpackets] = static_cast<double>(b.packets) / sf;
    v[fidx::sflow_bbytes] = static_cast<double>(b.bytes) / sf;

    v[fidx::fpsh_cnt] = static_cast<double>(f.psh);
    v[fidx::bpsh_cnt] = static_cast<double>(b.psh);
    v[fidx::fiurg_cnt] = static_cast<double>(f.urg);
    v[fidx::burg_cnt] = static_cast<double>(b.urg);
    v[fidx::total_fhlen] = static_cast<double>(f.header_bytes);
    v[fidx::total_bhlen] = static_cast<double>(b.header_bytes);
    return fv;
}

FlowTable::FlowTable(MeterConfig cfg) : cfg_(cfg) {}

void FlowTable::expire_into(int64_t now_us, std::vector<FeatureVector>& out) {
    while (!lru_.empty()) {
        auto it = flows_.find(lru_.front());
        if (now_us - it->second.state.last_ts_us > cfg_.idle_timeout_us) {
            out.push_back(remove(lru_.front()));
        } else {
            break;
        }
    }
    if (cfg_.max_flow_age_us > 0) {
        while (!by_age_.empty()) {
            auto [serial, canon] = by_age_.front();
            auto it = flows_.find(canon);
            if (it == flows_.end() || it->second.state.serial != serial) {
                by_age_.pop_front();  // flow already finalized, stale entry
                continue;
            }
            if (now_us - it->second.state.first_ts_us > cfg_.max_flow_age_us) {
                out.push_back(remove(canon));
            } else {
                break;
            }
        }
    }
}

FeatureVector FlowTable::remove(const FlowKey& canon) {
    auto it = flows_.find(canon);
    FeatureVector fv = finalize(it->second.state);
    lru_.erase(it->second.lru_pos);
    flows_.erase(it);
    return fv;
}

std::vector<FeatureVector> FlowTable::ingest(const PacketRecord& pkt,
                                             std::optional<uint64_t> packet_index) {
    std::vector<FeatureVector> done;

    if (pkt.ts_us + cfg_.ooo_tolerance_us < last_seen_ts_us_) ++ooo_warnings_;
    last_seen_ts_us_ = std::max(last_seen_ts_us_, pkt.ts_us);

    expire_into(pkt.ts_us, done);

    FlowKey key{pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port, pkt.protocol};
    FlowKey canon = key.canonical();
    auto it = flows_.find(canon);
    if (it == flows_.end()) {
        Entry e;
        e.state.key = canon;  // canonical orientation keeps f/b roles stable under relabeling
        e.state.first_ts_us = pkt.ts_us;
        e.state.last_ts_us = pkt.ts_us;
        e.state.active_start_us = pkt.ts_us;
        e.state.subflows = 1;
        e.state.serial = next_serial_++;
        lru_.push_back(canon);
        e.lru_pos = std::prev(lru_.end());
        it = flows_.emplace(canon, std::move(e)).first;
        by_age_.emplace_back(it->second.state.serial, canon);
    } else {
        lru_.splice(lru_.end(), lru_, it->second.lru_pos);
    }

    FlowState& st = it->second.state;
    st.add(pkt, cfg_.activity_threshold_us);
    if (cfg_.track_packet_indices && packet_index) st.packet_indices.push_back(*packet_index);

    if (pkt.protocol == kProtoTcp && (st.rst_seen || (st.fwd.fin_seen && st.bwd.fin_seen)))
        done.push_back(remove(canon));

    return done;
}

std::vector<FeatureVector> FlowTable::flush() {
    std::vector<FeatureVector> done;
    done.reserve(flows_.size());
    while (!lru_.empty()) done.push_back(remove(lru_.front()));
    by_age_.clear();
    return done;
}

}  // namespace botdet
