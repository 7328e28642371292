#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace poi {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

//! 32-byte digest. Output of the protocol hash function only.
struct Hash32 {
    std::array<uint8_t, 32> bytes{};

    auto operator<=>(const Hash32&) const = default;

    bool is_zero() const {
        for (uint8_t b : bytes)
            if (b != 0) return false;
        return true;
    }

    ByteSpan span() const { return ByteSpan{bytes.data(), bytes.size()}; }
};

std::string to_hex(ByteSpan data);
Bytes from_hex(const std::string& hex);

inline std::string to_hex(const Hash32& h) { return to_hex(h.span()); }
Hash32 hash_from_hex(const std::string& hex);

// Big-endian integer encoding. All on-disk and on-wire integers use these.
void put_u16be(Bytes& out, uint16_t v);
void put_u32be(Bytes& out, uint32_t v);
void put_u64be(Bytes& out, uint64_t v);
uint64_t read_u64be(const uint8_t* p);
uint32_t read_u32be(const uint8_t* p);
uint16_t read_u16be(const uint8_t* p);

//! Bounds-checked sequential reader over a byte buffer.
class ByteReader {
public:
    explicit ByteReader(ByteSpan data) : data_(data) {}

    size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return pos_ == data_.size(); }

    uint8_t u8();
    uint16_t u16be();
    uint32_t u32be();
    uint64_t u64be();
    Bytes take(size_t n);
    Hash32 hash32();

private:
    void need(size_t n) const {
        if (remaining() < n) throw std::out_of_range("byte buffer truncated");
    }

    ByteSpan data_;
    size_t pos_ = 0;
};

inline void append(Bytes& out, ByteSpan data) {
    out.insert(out.end(), data.begin(), data.end());
}

inline void append(Bytes& out, const Hash32& h) { append(out, h.span()); }

inline ByteSpan as_span(const Bytes& b) { return ByteSpan{b.data(), b.size()}; }

inline ByteSpan str_span(const char* s) {
    return ByteSpan{reinterpret_cast<const uint8_t*>(s), std::strlen(s)};
}

}  // namespace poi
