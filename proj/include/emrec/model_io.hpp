#ifndef EMREC_MODEL_IO_HPP
#define EMREC_MODEL_IO_HPP

#include <string>

#include "emrec/denoiser.hpp"
#include "emrec/io_common.hpp"

namespace emrec {

// Model file: magic "CIDMDL01", u32 version, u32 T, u32 K, u32 filter side,
// then per stage: encode taps (K * side^2 f64), decode taps, thresholds (K f64),
// u64 checksum of the payload.
inline constexpr char kModelMagic[8] = {'C', 'I', 'D', 'M', 'D', 'L', '0', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

inline void save_model(const CidModel& m, const std::string& path) {
    if (m.stages.empty()) throw IoError("save_model: model has no stages");
    const int k = m.stages.front().filter_count;
    const int side = m.stages.front().filter_side;
    PayloadWriter w;
    w.put_u32(kModelVersion);
    w.put_u32(static_cast<std::uint32_t>(m.stages.size()));
    w.put_u32(static_cast<std::uint32_t>(k));
    w.put_u32(static_cast<std::uint32_t>(side));
    for (const auto& stage : m.stages) {
        stage.validate();
        if (stage.filter_count != k || stage.filter_side != side)
            throw IoError("save_model: stages disagree on K or filter support");
        for (const auto& f : stage.encode) w.put_f64s(f.taps);
        for (const auto& f : stage.decode) w.put_f64s(f.taps);
        w.put_f64s(stage.alpha);
    }
    write_checked_file(path, kModelMagic, w);
}

inline CidModel load_model(const std::string& path) {
    PayloadReader r = read_checked_file(path, kModelMagic);
    const std::uint32_t version = r.get_u32();
    if (version != kModelVersion) throw IoError("unsupported model version in " + path);
    const std::uint32_t t = r.get_u32();
    const std::uint32_t k = r.get_u32();
    const std::uint32_t side = r.get_u32();
    if (t == 0 || k == 0 || side == 0 || side % 2 == 0)
        throw IoError("invalid model header in " + path);
    CidModel m;
    const std::size_t taps = static_cast<std::size_t>(side) * side;
    for (std::uint32_t n = 0; n < t; ++n) {
        CidStageParams stage(static_cast<int>(k), static_cast<int>(side));
        for (auto& f : stage.encode) r.get_f64s(f.taps, taps);
        for (auto& f : stage.decode) r.get_f64s(f.taps, taps);
        r.get_f64s(stage.alpha, k);
        stage.validate();
        m.stages.push_back(std::move(stage));
    }
    if (!r.exhausted()) throw IoError("trailing bytes in " + path);
    return m;
}

} // namespace emrec

#endif
