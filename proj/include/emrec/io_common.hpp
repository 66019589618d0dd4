#ifndef EMREC_IO_COMMON_HPP
#define EMREC_IO_COMMON_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace emrec {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a64(const unsigned char* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// All on-disk formats are little-endian.
static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

/// Accumulates payload bytes and their running checksum.
class PayloadWriter {
public:
    void put_u32(std::uint32_t v) { append(&v, sizeof v); }
    void put_u64(std::uint64_t v) { append(&v, sizeof v); }
    void put_i64(std::int64_t v) { append(&v, sizeof v); }
    void put_f64(double v) { append(&v, sizeof v); }
    void put_f64s(const std::vector<double>& v) { append(v.data(), v.size() * sizeof(double)); }
    void put_i64s(const std::vector<std::int64_t>& v) { append(v.data(), v.size() * sizeof(std::int64_t)); }

    const std::vector<unsigned char>& bytes() const { return buf_; }
    std::uint64_t checksum() const { return fnv1a64(buf_.data(), buf_.size()); }

private:
    void append(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    std::vector<unsigned char> buf_;
};

class PayloadReader {
public:
    explicit PayloadReader(std::vector<unsigned char> bytes) : buf_(std::move(bytes)) {}

    std::uint32_t get_u32() { return get<std::uint32_t>(); }
    std::uint64_t get_u64() { return get<std::uint64_t>(); }
    std::int64_t get_i64() { return get<std::int64_t>(); }
    double get_f64() { return get<double>(); }
    void get_f64s(std::vector<double>& v, std::size_t n) {
        v.resize(n);
        read(v.data(), n * sizeof(double));
    }
    void get_i64s(std::vector<std::int64_t>& v, std::size_t n) {
        v.resize(n);
        read(v.data(), n * sizeof(std::int64_t));
    }
    std::uint64_t checksum() const { return fnv1a64(buf_.data(), buf_.size()); }
    bool exhausted() const { return pos_ == buf_.size(); }

private:
    template <typename T>
    T get() {
        T v;
        read(&v, sizeof v);
        return v;
    }
    void read(void* p, std::size_t n) {
        if (pos_ + n > buf_.size()) throw IoError("truncated file payload");
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
};

/// Layout: magic (8 bytes), payload, fnv1a-64 checksum of the payload.
inline void write_checked_file(const std::string& path, const char magic[8],
                               const PayloadWriter& payload) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(magic, 8);
    os.write(reinterpret_cast<const char*>(payload.bytes().data()),
             static_cast<std::streamsize>(payload.bytes().size()));
    const std::uint64_t sum = payload.checksum();
    os.write(reinterpret_cast<const char*>(&sum), sizeof sum);
    if (!os) throw IoError("write failed: " + path);
}

inline PayloadReader read_checked_file(const std::string& path, const char magic[8]) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::vector<unsigned char> all((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
    if (all.size() < 16) throw IoError("truncated file: " + path);
    if (std::memcmp(all.data(), magic, 8) != 0) throw IoError("bad magic in " + path);
    std::uint64_t stored;
    std::memcpy(&stored, all.data() + all.size() - 8, 8);
    std::vector<unsigned char> payload(all.begin() + 8, all.end() - 8);
    if (fnv1a64(payload.data(), payload.size()) != stored)
        throw IoError("checksum mismatch in " + path);
    return PayloadReader(std::move(payload));
}

} // namespace emrec

#endif
