#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "entf/io.hpp"
#include "entf/tensor.hpp"

namespace fs = std::filesystem;
using entf::DenseTensor;

namespace {

fs::path temp_file(const std::string& name) { return fs::path(testing::TempDir()) / name; }

std::vector<unsigned char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(TensorFile, RoundTripIsBitwise) {
    std::mt19937_64 seeds(1);
    for (int rep = 0; rep < 20; ++rep) {
        const DenseTensor t = DenseTensor::random_uniform({3, 4, 5}, seeds(), -10.0, 10.0);
        const fs::path p = temp_file("roundtrip.tnsr");
        entf::write_tensor(p, t);
        const DenseTensor back = entf::read_tensor(p);
        ASSERT_EQ(back.shape(), t.shape());
        for (std::size_t i = 0; i < t.size(); ++i)
            ASSERT_EQ(back[i], t[i]);
    }
}

TEST(TensorFile, HeaderLayoutIsExact) {
    DenseTensor t({2, 3});
    t(1, 2) = -4.5;
    const fs::path p = temp_file("header.tnsr");
    entf::write_tensor(p, t);

    const auto bytes = read_bytes(p);
    // 8 magic + 4 order + 2*8 extents + 6*8 payload.
    ASSERT_EQ(bytes.size(), 8u + 4u + 16u + 48u);
    EXPECT_EQ(bytes[0], 'E');
    EXPECT_EQ(bytes[4], 'R');
    EXPECT_EQ(bytes[5], 0u);
    EXPECT_EQ(bytes[7], 1u);
    EXPECT_EQ(bytes[8], 2u);   // order, little-endian u32
    EXPECT_EQ(bytes[9], 0u);
    EXPECT_EQ(bytes[12], 2u);  // first extent
    EXPECT_EQ(bytes[20], 3u);  // second extent

    const DenseTensor back = entf::read_tensor(p);
    ASSERT_EQ(back.shape(), (entf::Shape{2, 3}));
    EXPECT_EQ(back(1, 2), -4.5);
}

TEST(TensorFile, WritesAreDeterministic) {
    const DenseTensor t = DenseTensor::random_uniform({4, 4}, 9);
    const fs::path p1 = temp_file("det1.tnsr");
    const fs::path p2 = temp_file("det2.tnsr");
    entf::write_tensor(p1, t);
    entf::write_tensor(p2, t);
    EXPECT_EQ(read_bytes(p1), read_bytes(p2));
}

TEST(TensorFile, DistinctErrorsForCorruptFiles) {
    const DenseTensor t = DenseTensor::random_uniform({2, 3}, 2);
    const fs::path good = temp_file("good.tnsr");
    entf::write_tensor(good, t);
    auto bytes = read_bytes(good);

    // Bad magic.
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    write_bytes(temp_file("bad_magic.tnsr"), bad_magic);
    try {
        entf::read_tensor(temp_file("bad_magic.tnsr"));
        FAIL() << "expected IoError";
    } catch (const entf::IoError& e) {
        EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
    }

    // Truncated payload.
    auto truncated = bytes;
    truncated.resize(bytes.size() - 8);
    write_bytes(temp_file("truncated.tnsr"), truncated);
    try {
        entf::read_tensor(temp_file("truncated.tnsr"));
        FAIL() << "expected IoError";
    } catch (const entf::IoError& e) {
        EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos);
    }

    // Extent overflow: two extents of 2^32 overflow the element budget.
    std::vector<unsigned char> overflow(bytes.begin(), bytes.begin() + 12);
    overflow[8] = 2;  // order 2
    for (int rep = 0; rep < 2; ++rep) {
        unsigned char ext[8] = {0, 0, 0, 0, 1, 0, 0, 0};  // 2^32
        overflow.insert(overflow.end(), ext, ext + 8);
    }
    write_bytes(temp_file("overflow.tnsr"), overflow);
    try {
        entf::read_tensor(temp_file("overflow.tnsr"));
        FAIL() << "expected IoError";
    } catch (const entf::IoError& e) {
        EXPECT_NE(std::string(e.what()).find("extent overflow"), std::string::npos);
    }

    // Zero extent.
    auto zero_extent = bytes;
    for (int i = 0; i < 8; ++i)
        zero_extent[12 + i] = 0;
    write_bytes(temp_file("zero.tnsr"), zero_extent);
    EXPECT_THROW(entf::read_tensor(temp_file("zero.tnsr")), entf::IoError);

    // Trailing garbage.
    auto trailing = bytes;
    trailing.push_back(0xAB);
    write_bytes(temp_file("trailing.tnsr"), trailing);
    EXPECT_THROW(entf::read_tensor(temp_file("trailing.tnsr")), entf::IoError);

    EXPECT_THROW(entf::read_tensor(temp_file("missing.tnsr")), entf::IoError);
}

TEST(AbundanceMaps, NormalizationConventions) {
    DenseTensor y({2, 2, 3});
    for (std::size_t px = 0; px < 6; ++px)
        y[px] = 0.75;                      // constant slice -> mid-gray
    y[6 + 1] = 1.0;                        // slice with values {0, 1}
    const fs::path dir = fs::path(testing::TempDir()) / "maps";
    const auto files = entf::write_abundance_maps(y, dir);
    ASSERT_EQ(files.size(), 2u);
    EXPECT_EQ(files[0].filename(), "map_0.pgm");

    const auto first = read_bytes(files[0]);
    const std::string header(first.begin(), first.begin() + 9);
    EXPECT_EQ(header, "P5\n3 2\n25");  // width=K=3, height=J=2, maxval 255
    for (std::size_t i = first.size() - 6; i < first.size(); ++i)
        EXPECT_EQ(first[i], 128u);

    const auto second = read_bytes(files[1]);
    for (std::size_t i = second.size() - 6; i < second.size(); ++i) {
        const std::size_t px = i - (second.size() - 6);
        EXPECT_EQ(second[i], px == 1 ? 255u : 0u);
    }
}

TEST(AbundanceMaps, DecodeReproducesNormalizedSliceWithinQuantization) {
    const DenseTensor y = DenseTensor::random_uniform({1, 6, 5}, 31, 0.0, 1.0);
    const fs::path dir = fs::path(testing::TempDir()) / "maps_decode";
    const auto files = entf::write_abundance_maps(y, dir);

    const auto bytes = read_bytes(files[0]);
    // Header is "P5\n5 6\n255\n" (11 bytes), then 30 raster bytes.
    ASSERT_EQ(bytes.size(), 11u + 30u);
    double lo = y[0], hi = y[0];
    for (std::size_t i = 0; i < 30; ++i) {
        lo = std::min(lo, y[i]);
        hi = std::max(hi, y[i]);
    }
    for (std::size_t i = 0; i < 30; ++i) {
        const double normalized = (y[i] - lo) / (hi - lo);
        const double decoded = static_cast<double>(bytes[11 + i]) / 255.0;
        ASSERT_NEAR(decoded, normalized, 0.5 / 255.0 + 1e-12);
    }

    EXPECT_THROW(entf::write_abundance_maps(DenseTensor({2, 2}), dir), entf::ShapeError);
}

TEST(RunConfig, RoundTripAndDefaults) {
    entf::RunConfig cfg;
    cfg.entf.r = 5;
    cfg.entf.lambda_x = 0.25;
    cfg.extrap.order = 4;
    cfg.scene.snr_db = 35.0;
    cfg.gamma_asc_auto = true;

    const nlohmann::json j = entf::run_config_to_json(cfg);
    const entf::RunConfig back = entf::run_config_from_json(j);
    EXPECT_EQ(back.entf.r, 5u);
    EXPECT_EQ(back.entf.lambda_x, 0.25);
    EXPECT_EQ(back.extrap.order, 4u);
    EXPECT_TRUE(back.gamma_asc_auto);
    ASSERT_TRUE(back.scene.snr_db.has_value());
    EXPECT_EQ(*back.scene.snr_db, 35.0);
    EXPECT_FALSE(back.lambda_s_auto);
}

TEST(RunConfig, UnknownKeysRejected) {
    EXPECT_THROW(entf::run_config_from_json({{"entf", {{"lambda_z", 1.0}}}}),
                 entf::ConfigError);
    EXPECT_THROW(entf::run_config_from_json({{"solver", {{"r", 3}}}}), entf::ConfigError);
    EXPECT_THROW(entf::run_config_from_json({{"entf", {{"lambda_s", "fast"}}}}),
                 entf::ConfigError);
    EXPECT_NO_THROW(entf::run_config_from_json({{"entf", {{"lambda_s", "auto"}}}}));
}

TEST(RunConfig, ReadsFromDisk) {
    const fs::path p = temp_file("config.json");
    {
        std::ofstream out(p);
        out << R"({"entf": {"r": 4, "gamma_asc": "auto"}, "extrap": {"probe": "random-seeded"}})";
    }
    const entf::RunConfig cfg = entf::read_run_config(p);
    EXPECT_EQ(cfg.entf.r, 4u);
    EXPECT_TRUE(cfg.gamma_asc_auto);
    EXPECT_EQ(cfg.extrap.probe, entf::TetProbe::RandomSeeded);

    const fs::path bad = temp_file("bad.json");
    {
        std::ofstream out(bad);
        out << "{ not json";
    }
    EXPECT_THROW(entf::read_run_config(bad), entf::ConfigError);
    EXPECT_THROW(entf::read_run_config(temp_file("missing.json")), entf::IoError);
}
