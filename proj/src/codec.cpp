#include "aoibench/codec.hpp"

#include <cstring>

namespace aoibench::codec {

namespace {

constexpr uint8_t kTypeConnect = 1;
constexpr uint8_t kTypeConnAck = 2;
constexpr uint8_t kTypePublish = 3;
constexpr uint8_t kTypePubAck = 4;
constexpr uint8_t kTypeSubscribe = 8;
constexpr uint8_t kTypeSubAck = 9;
constexpr uint8_t kTypeDisconnect = 14;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v & 0xFF));
}

void put_string(std::vector<uint8_t>& out, const std::string& s) {
    if (s.size() > 0xFFFF) throw CodecError("string field exceeds 65535 bytes");
    put_u16(out, static_cast<uint16_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

std::vector<uint8_t> frame(uint8_t first_byte, const std::vector<uint8_t>& body) {
    if (body.size() > kMaxRemainingLength) throw CodecError("remaining length overflow");
    std::vector<uint8_t> out;
    out.reserve(body.size() + 5);
    out.push_back(first_byte);
    auto rl = encode_remaining_length(static_cast<uint32_t>(body.size()));
    out.insert(out.end(), rl.begin(), rl.end());
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

// Body reader with bounds checking; all reads are within the remaining length.
struct Reader {
    std::span<const uint8_t> b;
    size_t pos = 0;

    uint8_t u8() {
        if (pos + 1 > b.size()) throw CodecError("truncated body");
        return b[pos++];
    }
    uint16_t u16() {
        if (pos + 2 > b.size()) throw CodecError("truncated body");
        uint16_t v = static_cast<uint16_t>(b[pos] << 8 | b[pos + 1]);
        pos += 2;
        return v;
    }
    std::string str() {
        uint16_t n = u16();
        if (pos + n > b.size()) throw CodecError("truncated string");
        std::string s(reinterpret_cast<const char*>(b.data() + pos), n);
        pos += n;
        return s;
    }
    std::vector<uint8_t> rest() {
        std::vector<uint8_t> v(b.begin() + static_cast<ptrdiff_t>(pos), b.end());
        pos = b.size();
        return v;
    }
    void expect_end() const {
        if (pos != b.size()) throw CodecError("trailing bytes in packet body");
    }
};

MqttPacket decode_body(uint8_t type, uint8_t flags, std::span<const uint8_t> body) {
    Reader r{body};
    switch (type) {
        case kTypeConnect: {
            if (flags != 0) throw CodecError("connect flags must be 0");
            if (r.str() != "MQTT") throw CodecError("bad protocol name");
            if (r.u8() != 4) throw CodecError("unsupported protocol level");
            uint8_t cf = r.u8();
            if (cf & 0xFD) throw CodecError("unsupported connect flags");
            Connect c;
            c.clean_session = (cf & 0x02) != 0;
            c.keep_alive = r.u16();
            c.client_id = r.str();
            r.expect_end();
            return c;
        }
        case kTypeConnAck: {
            if (flags != 0) throw CodecError("connack flags must be 0");
            uint8_t sp = r.u8();
            if (sp > 1) throw CodecError("bad connack ack-flags byte");
            ConnAck a;
            a.return_code = r.u8();
            if (a.return_code > 5) throw CodecError("connack return code out of range");
            r.expect_end();
            return a;
        }
        case kTypePublish: {
            uint8_t qos = (flags >> 1) & 0x03;
            if (qos > 1) throw CodecError("qos 2 not supported");
            Publish p;
            p.qos = qos;
            p.topic = r.str();
            if (qos == 1) p.packet_id = r.u16();
            p.payload = r.rest();
            return p;
        }
        case kTypePubAck: {
            if (flags != 0) throw CodecError("puback flags must be 0");
            PubAck a;
            a.packet_id = r.u16();
            r.expect_end();
            return a;
        }
        case kTypeSubscribe: {
            if (flags != 2) throw CodecError("subscribe flags must be 2");
            Subscribe s;
            s.packet_id = r.u16();
            s.topic_filter = r.str();
            s.requested_qos = r.u8();
            if (s.requested_qos > 1) throw CodecError("qos 2 not supported");
            r.expect_end();
            return s;
        }
        case kTypeSubAck: {
            if (flags != 0) throw CodecError("suback flags must be 0");
            SubAck a;
            a.packet_id = r.u16();
            a.return_code = r.u8();
            if (a.return_code > 1 && a.return_code != 0x80)
                throw CodecError("suback return code out of range");
            r.expect_end();
            return a;
        }
        case kTypeDisconnect: {
            if (flags != 0) throw CodecError("disconnect flags must be 0");
            r.expect_end();
            return Disconnect{};
        }
        default:
            throw CodecError("unknown packet type " + std::to_string(type));
    }
}

}  // namespace

std::vector<uint8_t> encode_remaining_length(uint32_t n) {
    if (n > kMaxRemainingLength) throw CodecError("remaining length out of range");
    std::vector<uint8_t> out;
    do {
        uint8_t b = n % 128;
        n /= 128;
        if (n > 0) b |= 0x80;
        out.push_back(b);
    } while (n > 0);
    return out;
}

std::vector<uint8_t> encode_packet(const MqttPacket& p) {
    std::vector<uint8_t> body;
    return std::visit(
        [&](const auto& pkt) -> std::vector<uint8_t> {
            using T = std::decay_t<decltype(pkt)>;
            if constexpr (std::is_same_v<T, Connect>) {
                put_string(body, "MQTT");
                body.push_back(4);  // protocol level
                body.push_back(pkt.clean_session ? 0x02 : 0x00);
                put_u16(body, pkt.keep_alive);
                put_string(body, pkt.client_id);
                return frame(kTypeConnect << 4, body);
            } else if constexpr (std::is_same_v<T, ConnAck>) {
                if (pkt.return_code > 5) throw CodecError("connack return code out of range");
                body.push_back(0);
                body.push_back(pkt.return_code);
                return frame(kTypeConnAck << 4, body);
            } else if constexpr (std::is_same_v<T, Publish>) {
                if (pkt.qos > 1) throw CodecError("qos 2 not supported");
                if (pkt.qos == 1 && !pkt.packet_id)
                    throw CodecError("qos 1 publish requires a packet id");
                if (pkt.qos == 0 && pkt.packet_id)
                    throw CodecError("qos 0 publish carries no packet id");
                put_string(body, pkt.topic);
                if (pkt.qos == 1) put_u16(body, *pkt.packet_id);
                body.insert(body.end(), pkt.payload.begin(), pkt.payload.end());
                return frame(static_cast<uint8_t>(kTypePublish << 4 | pkt.qos << 1), body);
            } else if constexpr (std::is_same_v<T, PubAck>) {
                put_u16(body, pkt.packet_id);
                return frame(kTypePubAck << 4, body);
            } else if constexpr (std::is_same_v<T, Subscribe>) {
                if (pkt.requested_qos > 1) throw CodecError("qos 2 not supported");
                put_u16(body, pkt.packet_id);
                put_string(body, pkt.topic_filter);
                body.push_back(pkt.requested_qos);
                return frame(kTypeSubscribe << 4 | 0x02, body);
            } else if constexpr (std::is_same_v<T, SubAck>) {
                put_u16(body, pkt.packet_id);
                body.push_back(pkt.return_code);
                return frame(kTypeSubAck << 4, body);
            } else {
                return frame(kTypeDisconnect << 4, body);
            }
        },
        p);
}

std::optional<Decoded> decode_packet(std::span<const uint8_t> bytes) {
    if (bytes.size() < 2) return std::nullopt;
    uint8_t type = bytes[0] >> 4;
    uint8_t flags = bytes[0] & 0x0F;

    uint32_t remaining = 0;
    uint32_t mult = 1;
    size_t rl_len = 0;
    for (;;) {
        if (1 + rl_len >= bytes.size()) return std::nullopt;
        uint8_t b = bytes[1 + rl_len];
        remaining += (b & 0x7F) * mult;
        ++rl_len;
        if ((b & 0x80) == 0) break;
        if (rl_len == 4) throw CodecError("malformed remaining-length varint");
        mult *= 128;
    }

    size_t total = 1 + rl_len + remaining;
    if (bytes.size() < total) return std::nullopt;

    auto body = bytes.subspan(1 + rl_len, remaining);
    return Decoded{decode_body(type, flags, body), total};
}

}  // namespace aoibench::codec
