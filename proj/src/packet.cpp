#include "botdet/packet.hpp"

#include <cstdio>

namespace botdet {

namespace {

uint16_t rd16(std::span<const uint8_t> b, size_t off) {
    return static_cast<uint16_t>((b[off] << 8) | b[off + 1]);
}

uint32_t rd32(std::span<const uint8_t> b, size_t off) {
    return (static_cast<uint32_t>(b[off]) << 24) | (static_cast<uint32_t>(b[off + 1]) << 16) |
           (static_cast<uint32_t>(b[off + 2]) << 8) | static_cast<uint32_t>(b[off + 3]);
}

constexpr uint16_t kEtherTypeIpv4 = 0x0800;
constexpr uint16_t kEtherTypeVlan = 0x8100;
constexpr uint16_t kEtherTypeQinQ = 0x88a8;

}  // namespace

ParseResult parse_packet(std::span<const uint8_t> raw, int link_type, int64_t ts_us) {
    size_t off = 0;

    if (link_type == kLinkEthernet) {
        if (raw.size() < 14) return {ParseStatus::truncated, {}};
        uint16_t ethertype = rd16(raw, 12);
        off = 14;
        while (ethertype == kEtherTypeVlan || ethertype == kEtherTypeQinQ) {
            if (raw.size() < off + 4) return {ParseStatus::truncated, {}};
            ethertype = rd16(raw, off + 2);
            off += 4;
        }
        if (ethertype != kEtherTypeIpv4) return {ParseStatus::skip, {}};
    } else if (link_type != kLinkRawIp) {
        return {ParseStatus::skip, {}};
    }

    // IPv4 header
    if (raw.size() < off + 20) return {ParseStatus::truncated, {}};
    uint8_t ver = raw[off] >> 4;
    if (ver != 4) return {ParseStatus::skip, {}};
    uint16_t ihl = static_cast<uint16_t>((raw[off] & 0x0f) * 4);
    if (ihl < 20) return {ParseStatus::malformed, {}};
    if (raw.size() < off + ihl) return {ParseStatus::malformed, {}};

    uint8_t proto = raw[off + 9];
    if (proto != kProtoTcp && proto != kProtoUdp) return {ParseStatus::skip, {}};

    // non-first fragments carry no transport header
    uint16_t frag = rd16(raw, off + 6);
    if ((frag & 0x1fff) != 0) return {ParseStatus::skip, {}};

    PacketRecord rec;
    rec.ts_us = ts_us;
    rec.ip_total_len = rd16(raw, off + 2);
    rec.ip_header_len = ihl;
    rec.protocol = proto;
    rec.src_ip = rd32(raw, off + 12);
    rec.dst_ip = rd32(raw, off + 16);

    size_t tp = off + ihl;
    if (proto == kProtoUdp) {
        if (raw.size() < tp + 8) return {ParseStatus::truncated, {}};
        rec.transport_header_len = 8;
        rec.src_port = rd16(raw, tp);
        rec.dst_port = rd16(raw, tp + 2);
    } else {
        if (raw.size() < tp + 20) return {ParseStatus::truncated, {}};
        uint16_t doff = static_cast<uint16_t>((raw[tp + 12] >> 4) * 4);
        if (doff < 20) return {ParseStatus::malformed, {}};
        if (raw.size() < tp + doff) return {ParseStatus::malformed, {}};
        rec.transport_header_len = doff;
        rec.src_port = rd16(raw, tp);
        rec.dst_port = rd16(raw, tp + 2);
        uint8_t f = raw[tp + 13];
        if (f & 0x01) rec.flags |= kFlagFin;
        if (f & 0x02) rec.flags |= kFlagSyn;
        if (f & 0x04) rec.flags |= kFlagRst;
        if (f & 0x08) rec.flags |= kFlagPsh;
        if (f & 0x20) rec.flags |= kFlagUrg;
    }

    if (rec.ip_total_len < static_cast<uint32_t>(rec.ip_header_len) + rec.transport_header_len)
        return {ParseStatus::malformed, {}};

    return {ParseStatus::ok, rec};
}

std::string ip_to_string(uint32_t ip) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (ip >> 24) & 0xff, (ip >> 16) & 0xff,
                  (ip >> 8) & 0xff, ip & 0xff);
    return buf;
}

}  // namespace botdet
