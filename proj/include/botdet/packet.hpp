/* packet.hpp
 *
 * Parsed packet records and raw-frame decoding (Ethernet / raw-IP,
 * IPv4, TCP/UDP). Anything that is not IPv4 TCP/UDP is reported as a
 * skip, not an error.
 */
#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace botdet {

// pcap link types we understand
inline constexpr int kLinkEthernet = 1;
inline constexpr int kLinkRawIp = 101;

inline constexpr uint8_t kProtoTcp = 6;
inline constexpr uint8_t kProtoUdp = 17;

// TCP flag bits as stored in PacketRecord::flags
enum TcpFlag : uint8_t {
    kFlagFin = 0x01,
    kFlagSyn = 0x02,
    kFlagRst = 0x04,
    kFlagPsh = 0x08,
    kFlagUrg = 0x10,
};

struct PacketRecord {
    int64_t ts_us = 0;
    uint32_t src_ip = 0;   // host byte order
    uint32_t dst_ip = 0;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint8_t protocol = 0;  // 6 = TCP, 17 = UDP
    uint32_t ip_total_len = 0;        // IP header + payload, from the IP header
    uint16_t ip_header_len = 0;       // >= 20
    uint16_t transport_header_len = 0; // 8 for UDP, >= 20 for TCP
    uint8_t flags = 0;                // TcpFlag bits, 0 for UDP
};

enum class ParseStatus {
    ok,        // record populated
    skip,      // not IPv4 TCP/UDP (ARP, IPv6, ICMP, fragments, ...)
    truncated, // captured bytes shorter than the minimal headers
    malformed, // declared header lengths exceed the captured bytes
};

struct ParseResult {
    ParseStatus status = ParseStatus::skip;
    PacketRecord record;
};

// Decode one captured frame. 802.1Q VLAN tags are skipped transparently.
ParseResult parse_packet(std::span<const uint8_t> raw, int link_type, int64_t ts_us);

std::string ip_to_string(uint32_t ip);

}  // namespace botdet
