#ifndef EMREC_IMAGE_IO_HPP
#define EMREC_IMAGE_IO_HPP

#include <string>

#include "emrec/geometry.hpp"
#include "emrec/io_common.hpp"
#include "emrec/simulate.hpp"

namespace emrec {

// Image file: magic "EMRIMG01", u32 version, u32 n_x, u32 n_y,
// n_x*n_y f64 little-endian, u64 checksum.
inline constexpr char kImageMagic[8] = {'E', 'M', 'R', 'I', 'M', 'G', '0', '1'};
inline constexpr std::uint32_t kImageVersion = 1;

inline void save_image(const Image& img, const std::string& path) {
    PayloadWriter w;
    w.put_u32(kImageVersion);
    w.put_u32(static_cast<std::uint32_t>(img.n_x));
    w.put_u32(static_cast<std::uint32_t>(img.n_y));
    w.put_f64s(img.values);
    write_checked_file(path, kImageMagic, w);
}

inline Image load_image(const std::string& path) {
    PayloadReader r = read_checked_file(path, kImageMagic);
    const std::uint32_t version = r.get_u32();
    if (version != kImageVersion) throw IoError("unsupported image version in " + path);
    Image img;
    img.n_x = static_cast<int>(r.get_u32());
    img.n_y = static_cast<int>(r.get_u32());
    r.get_f64s(img.values, static_cast<std::size_t>(img.n_x) * img.n_y);
    if (!r.exhausted()) throw IoError("trailing bytes in " + path);
    return img;
}

// Measurement file: magic "EMRMEA01", u32 version, u32 n_angles, u32 n_bins,
// counts as i64, background means as f64, u64 checksum.
inline constexpr char kMeasurementMagic[8] = {'E', 'M', 'R', 'M', 'E', 'A', '0', '1'};
inline constexpr std::uint32_t kMeasurementVersion = 1;

inline void save_measurement(const Measurement& m, const std::string& path) {
    PayloadWriter w;
    w.put_u32(kMeasurementVersion);
    w.put_u32(static_cast<std::uint32_t>(m.n_angles));
    w.put_u32(static_cast<std::uint32_t>(m.n_bins));
    w.put_i64s(m.y);
    w.put_f64s(m.r_bar);
    write_checked_file(path, kMeasurementMagic, w);
}

inline Measurement load_measurement(const std::string& path) {
    PayloadReader r = read_checked_file(path, kMeasurementMagic);
    const std::uint32_t version = r.get_u32();
    if (version != kMeasurementVersion) throw IoError("unsupported measurement version in " + path);
    Measurement m;
    m.n_angles = static_cast<int>(r.get_u32());
    m.n_bins = static_cast<int>(r.get_u32());
    const std::size_t n = static_cast<std::size_t>(m.n_angles) * m.n_bins;
    r.get_i64s(m.y, n);
    r.get_f64s(m.r_bar, n);
    if (!r.exhausted()) throw IoError("trailing bytes in " + path);
    return m;
}

} // namespace emrec

#endif
