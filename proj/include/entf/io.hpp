// Portable serialization: a little-endian binary tensor format, PGM export
// of abundance maps, and the JSON run configuration shared by the library
// and the command-line driver.

#pragma once

#include <json.hpp>

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "entf/extrapolation.hpp"
#include "entf/solver.hpp"
#include "entf/synth.hpp"
#include "entf/tensor.hpp"

namespace entf {

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

inline constexpr std::array<unsigned char, 8> kTensorMagic = {'E', 'T', 'N', 'S', 'R', 0, 0, 1};

namespace detail {

inline void put_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i)
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline bool get_u32le(std::istream& in, std::uint32_t& v) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        return false;
    v = 0;
    for (int i = 3; i >= 0; --i)
        v = (v << 8) | b[i];
    return true;
}

inline bool get_u64le(std::istream& in, std::uint64_t& v) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        return false;
    v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | b[i];
    return true;
}

}  // namespace detail

/// Writes magic, order (u32), extents (u64 each) and the row-major f64
/// payload, all little-endian; deterministic byte-for-byte.
inline void write_tensor(const std::filesystem::path& path, const DenseTensor& t) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("write_tensor: cannot open '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(kTensorMagic.data()), kTensorMagic.size());
    detail::put_u32le(out, static_cast<std::uint32_t>(t.order()));
    for (std::size_t e : t.shape())
        detail::put_u64le(out, static_cast<std::uint64_t>(e));
    for (double v : t.data())
        detail::put_u64le(out, std::bit_cast<std::uint64_t>(v));
    if (!out)
        throw IoError("write_tensor: write failed for '" + path.string() + "'");
}

inline DenseTensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("read_tensor: cannot open '" + path.string() + "'");

    std::array<unsigned char, 8> magic{};
    if (!in.read(reinterpret_cast<char*>(magic.data()), magic.size()) || magic != kTensorMagic)
        throw IoError("read_tensor: bad magic in '" + path.string() + "'");

    std::uint32_t order = 0;
    if (!detail::get_u32le(in, order) || order == 0 || order > 64)
        throw IoError("read_tensor: invalid order in '" + path.string() + "'");

    Shape shape(order);
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < order; ++d) {
        std::uint64_t e = 0;
        if (!detail::get_u64le(in, e))
            throw IoError("read_tensor: truncated header in '" + path.string() + "'");
        if (e == 0)
            throw IoError("read_tensor: invalid zero extent in '" + path.string() + "'");
        if (e > std::numeric_limits<std::uint64_t>::max() / count ||
            count * e > (std::uint64_t{1} << 40))
            throw IoError("read_tensor: extent overflow in '" + path.string() + "'");
        count *= e;
        shape[d] = static_cast<std::size_t>(e);
    }

    std::vector<double> data(static_cast<std::size_t>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        if (!detail::get_u64le(in, bits))
            throw IoError("read_tensor: truncated payload in '" + path.string() + "'");
        data[static_cast<std::size_t>(i)] = std::bit_cast<double>(bits);
    }
    char extra = 0;
    if (in.read(&extra, 1))
        throw IoError("read_tensor: trailing bytes after payload in '" + path.string() + "'");
    return DenseTensor(std::move(shape), std::move(data));
}

/// One 8-bit binary PGM per endmember slice of an r x J x K abundance
/// tensor, written as map_<idx>.pgm. Each slice is min-max normalized on
/// its own; a constant slice maps to mid-gray.
inline std::vector<std::filesystem::path> write_abundance_maps(
    const DenseTensor& y, const std::filesystem::path& dir) {
    if (y.order() != 3)
        throw ShapeError("write_abundance_maps: expected an r x J x K tensor");
    if (min_value(y) < 0.0)
        throw Error("write_abundance_maps: abundances must be nonnegative");
    std::filesystem::create_directories(dir);

    const std::size_t r = y.extent(0);
    const std::size_t rows = y.extent(1);
    const std::size_t cols = y.extent(2);
    const std::size_t pixels = rows * cols;

    std::vector<std::filesystem::path> files;
    for (std::size_t i = 0; i < r; ++i) {
        double lo = y[i * pixels];
        double hi = lo;
        for (std::size_t px = 0; px < pixels; ++px) {
            lo = std::min(lo, y[i * pixels + px]);
            hi = std::max(hi, y[i * pixels + px]);
        }
        const std::filesystem::path file = dir / ("map_" + std::to_string(i) + ".pgm");
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("write_abundance_maps: cannot open '" + file.string() + "'");
        out << "P5\n" << cols << ' ' << rows << "\n255\n";
        for (std::size_t px = 0; px < pixels; ++px) {
            unsigned char g = 128;
            if (hi > lo)
                g = static_cast<unsigned char>(
                    std::lround((y[i * pixels + px] - lo) / (hi - lo) * 255.0));
            out.put(static_cast<char>(g));
        }
        if (!out)
            throw IoError("write_abundance_maps: write failed for '" + file.string() + "'");
        files.push_back(file);
    }
    return files;
}

/// Run configuration document: solver, extrapolation and scene sections.
/// Values of "auto" for lambda_s and gamma_asc are resolved against the
/// input cube before a run; the persisted copy always carries numbers.
struct RunConfig {
    EntfConfig entf;
    ExtrapConfig extrap;
    SceneParams scene;
    bool lambda_s_auto = false;
    bool gamma_asc_auto = false;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const char* section,
                                std::initializer_list<const char*> known) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (item.key() == k)
                ok = true;
        if (!ok)
            throw ConfigError(std::string("config: unknown key '") + item.key() + "' in " +
                              section);
    }
}

template <typename T>
inline void read_key(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key))
        j.at(key).get_to(out);
}

}  // namespace detail

inline std::string probe_name(TetProbe p) {
    return p == TetProbe::FirstDifference ? "first-difference" : "random-seeded";
}

inline TetProbe parse_probe(const std::string& name) {
    if (name == "first-difference")
        return TetProbe::FirstDifference;
    if (name == "random-seeded")
        return TetProbe::RandomSeeded;
    throw ConfigError("config: unknown probe '" + name + "'");
}

inline std::string endmember_family_name(EndmemberFamily f) {
    return f == EndmemberFamily::SmoothGaussianMixture ? "smooth-gaussian-mixture"
                                                       : "random-positive";
}

inline EndmemberFamily parse_endmember_family(const std::string& name) {
    if (name == "smooth-gaussian-mixture")
        return EndmemberFamily::SmoothGaussianMixture;
    if (name == "random-positive")
        return EndmemberFamily::RandomPositive;
    throw ConfigError("config: unknown endmember family '" + name + "'");
}

inline std::string abundance_family_name(AbundanceFamily f) {
    return f == AbundanceFamily::Dirichlet ? "dirichlet" : "smooth-fields";
}

inline AbundanceFamily parse_abundance_family(const std::string& name) {
    if (name == "dirichlet")
        return AbundanceFamily::Dirichlet;
    if (name == "smooth-fields")
        return AbundanceFamily::SmoothFields;
    throw ConfigError("config: unknown abundance family '" + name + "'");
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json entf_section = {
        {"r", cfg.entf.r},
        {"lambda_s", cfg.lambda_s_auto ? nlohmann::json("auto") : nlohmann::json(cfg.entf.lambda_s)},
        {"lambda_x", cfg.entf.lambda_x},
        {"lambda_y", cfg.entf.lambda_y},
        {"rank_x", cfg.entf.rank_x},
        {"gamma_asc",
         cfg.gamma_asc_auto ? nlohmann::json("auto") : nlohmann::json(cfg.entf.gamma_asc)},
        {"eps_stop", cfg.entf.eps_stop},
        {"max_iter", cfg.entf.max_iter},
        {"eps_div", cfg.entf.eps_div},
        {"seed", cfg.entf.seed},
    };
    nlohmann::json extrap_section = {
        {"order", cfg.extrap.order},
        {"probe", probe_name(cfg.extrap.probe)},
        {"probe_seed", cfg.extrap.probe_seed},
        {"restart_clamp", cfg.extrap.restart_clamp},
        {"literal_tet_rhs", cfg.extrap.literal_tet_rhs},
    };
    nlohmann::json scene_section = {
        {"bands", cfg.scene.bands},
        {"width", cfg.scene.width},
        {"height", cfg.scene.height},
        {"endmembers", cfg.scene.endmembers},
        {"seed", cfg.scene.seed},
        {"endmember_family", endmember_family_name(cfg.scene.endmember_family)},
        {"abundance_family", abundance_family_name(cfg.scene.abundance_family)},
    };
    if (cfg.scene.snr_db)
        scene_section["snr_db"] = *cfg.scene.snr_db;
    return {{"entf", entf_section}, {"extrap", extrap_section}, {"scene", scene_section}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw ConfigError("config: document root must be an object");
    detail::reject_unknown_keys(j, "the document root", {"entf", "extrap", "scene"});

    RunConfig cfg;
    if (j.contains("entf")) {
        const auto& e = j.at("entf");
        detail::reject_unknown_keys(e, "entf",
                                    {"r", "lambda_s", "lambda_x", "lambda_y", "rank_x",
                                     "gamma_asc", "eps_stop", "max_iter", "eps_div", "seed"});
        detail::read_key(e, "r", cfg.entf.r);
        if (e.contains("lambda_s")) {
            if (e.at("lambda_s").is_string()) {
                if (e.at("lambda_s").get<std::string>() != "auto")
                    throw ConfigError("config: lambda_s must be a number or \"auto\"");
                cfg.lambda_s_auto = true;
            } else {
                e.at("lambda_s").get_to(cfg.entf.lambda_s);
            }
        }
        detail::read_key(e, "lambda_x", cfg.entf.lambda_x);
        detail::read_key(e, "lambda_y", cfg.entf.lambda_y);
        detail::read_key(e, "rank_x", cfg.entf.rank_x);
        if (e.contains("gamma_asc")) {
            if (e.at("gamma_asc").is_string()) {
                if (e.at("gamma_asc").get<std::string>() != "auto")
                    throw ConfigError("config: gamma_asc must be a number or \"auto\"");
                cfg.gamma_asc_auto = true;
            } else {
                e.at("gamma_asc").get_to(cfg.entf.gamma_asc);
            }
        }
        detail::read_key(e, "eps_stop", cfg.entf.eps_stop);
        detail::read_key(e, "max_iter", cfg.entf.max_iter);
        detail::read_key(e, "eps_div", cfg.entf.eps_div);
        detail::read_key(e, "seed", cfg.entf.seed);
    }
    if (j.contains("extrap")) {
        const auto& e = j.at("extrap");
        detail::reject_unknown_keys(
            e, "extrap", {"order", "probe", "probe_seed", "restart_clamp", "literal_tet_rhs"});
        detail::read_key(e, "order", cfg.extrap.order);
        if (e.contains("probe"))
            cfg.extrap.probe = parse_probe(e.at("probe").get<std::string>());
        detail::read_key(e, "probe_seed", cfg.extrap.probe_seed);
        detail::read_key(e, "restart_clamp", cfg.extrap.restart_clamp);
        detail::read_key(e, "literal_tet_rhs", cfg.extrap.literal_tet_rhs);
    }
    if (j.contains("scene")) {
        const auto& s = j.at("scene");
        detail::reject_unknown_keys(s, "scene",
                                    {"bands", "width", "height", "endmembers", "snr_db", "seed",
                                     "endmember_family", "abundance_family"});
        detail::read_key(s, "bands", cfg.scene.bands);
        detail::read_key(s, "width", cfg.scene.width);
        detail::read_key(s, "height", cfg.scene.height);
        detail::read_key(s, "endmembers", cfg.scene.endmembers);
        if (s.contains("snr_db"))
            cfg.scene.snr_db = s.at("snr_db").get<double>();
        detail::read_key(s, "seed", cfg.scene.seed);
        if (s.contains("endmember_family"))
            cfg.scene.endmember_family =
                parse_endmember_family(s.at("endmember_family").get<std::string>());
        if (s.contains("abundance_family"))
            cfg.scene.abundance_family =
                parse_abundance_family(s.at("abundance_family").get<std::string>());
    }
    return cfg;
}

inline RunConfig read_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("config: cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: parse error in '" + path.string() + "': " + e.what());
    }
    return run_config_from_json(j);
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("write_json: cannot open '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

}  // namespace entf
