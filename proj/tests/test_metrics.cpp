#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "entf/metrics.hpp"
#include "entf/tensor.hpp"

using entf::DenseTensor;

TEST(Mse, IdenticalAndShiftedCubes) {
    const DenseTensor a = DenseTensor::random_uniform({2, 2, 2}, 1, 0.0, 1.0);
    EXPECT_EQ(entf::mse(a, a), 0.0);

    const DenseTensor shifted = entf::add(a, DenseTensor::ones({2, 2, 2}));
    EXPECT_NEAR(entf::mse(a, shifted), std::sqrt(8.0) / 8.0, 1e-15);
    EXPECT_THROW(entf::mse(a, DenseTensor({2, 2})), entf::ShapeError);
}

TEST(Mse, MatchesDirectFormulaAndIsSymmetric) {
    const DenseTensor a = DenseTensor::random_uniform({3, 4, 5}, 2, 0.0, 1.0);
    const DenseTensor b = DenseTensor::random_uniform({3, 4, 5}, 3, 0.0, 1.0);
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        sq += (a[i] - b[i]) * (a[i] - b[i]);
    EXPECT_NEAR(entf::mse(a, b), std::sqrt(sq) / 60.0, 1e-14);
    EXPECT_EQ(entf::mse(a, b), entf::mse(b, a));
}

TEST(Sam, AnalyticAngles) {
    const DenseTensor u({2}, {1.0, 0.0});
    const DenseTensor v({2}, {0.0, 1.0});
    const DenseTensor w({2}, {1.0, 1.0});
    EXPECT_EQ(entf::sam(u, u), 0.0);
    EXPECT_NEAR(entf::sam(u, v), std::numbers::pi / 2.0, 1e-15);
    EXPECT_NEAR(entf::sam(u, w), std::numbers::pi / 4.0, 1e-15);
    EXPECT_THROW(entf::sam(u, DenseTensor({2})), entf::Error);
}

TEST(Sam, ScaleInvarianceAndClamping) {
    const DenseTensor u = DenseTensor::random_uniform({8}, 4, 0.1, 1.0);
    const DenseTensor v = DenseTensor::random_uniform({8}, 5, 0.1, 1.0);
    EXPECT_NEAR(entf::sam(entf::scale(u, 37.5), v), entf::sam(u, v), 1e-12);
    // Parallel vectors: the cosine can exceed 1 by rounding; must clamp.
    EXPECT_EQ(entf::sam(u, entf::scale(u, 3.0)), 0.0);
}

TEST(MatchEndmembers, RecoverShuffledNoisyColumns) {
    const std::size_t bands = 12, r = 4;
    const DenseTensor x_true = DenseTensor::random_uniform({bands, r}, 6, 0.1, 1.0);

    // Identity matching.
    auto perm = entf::match_endmembers(x_true, x_true);
    for (std::size_t i = 0; i < r; ++i)
        EXPECT_EQ(perm[i], i);

    // Known shuffle with small perturbation: matching must invert it.
    const std::size_t shuffle[4] = {2, 0, 3, 1};
    DenseTensor x_hat({bands, r});
    std::mt19937_64 rng(7);
    for (std::size_t b = 0; b < bands; ++b)
        for (std::size_t j = 0; j < r; ++j) {
            const double noise =
                1.0 + 0.02 * (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);
            x_hat(b, shuffle[j]) = x_true(b, j) * noise;
        }
    perm = entf::match_endmembers(x_true, x_hat);
    for (std::size_t i = 0; i < r; ++i)
        EXPECT_EQ(perm[i], shuffle[i]);

    // Matching is invariant under positive rescaling of any estimate column.
    DenseTensor rescaled = x_hat;
    for (std::size_t b = 0; b < bands; ++b)
        rescaled(b, 1) *= 250.0;
    const auto perm2 = entf::match_endmembers(x_true, rescaled);
    for (std::size_t i = 0; i < r; ++i)
        EXPECT_EQ(perm2[i], perm[i]);
}

TEST(MatchEndmembers, RejectsOversizedProblems) {
    const DenseTensor x = DenseTensor::random_uniform({12, 11}, 8, 0.1, 1.0);
    EXPECT_THROW(entf::match_endmembers(x, x), entf::Error);
}

TEST(MseY, PermutedEstimateScoresZero) {
    const DenseTensor y_true = DenseTensor::random_uniform({3, 4, 5}, 9, 0.0, 1.0);
    EXPECT_EQ(entf::mse_y(y_true, y_true, {0, 1, 2}, 10), 0.0);

    // Shuffle the estimated endmember mode; the right permutation undoes it.
    DenseTensor y_hat({3, 4, 5});
    const std::size_t shuffle[3] = {1, 2, 0};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t px = 0; px < 20; ++px)
            y_hat[shuffle[i] * 20 + px] = y_true[i * 20 + px];
    EXPECT_EQ(entf::mse_y(y_true, y_hat, {1, 2, 0}, 10), 0.0);
}

TEST(MseY, MatchesDirectFormula) {
    const DenseTensor y_true = DenseTensor::random_uniform({2, 3, 3}, 10, 0.0, 1.0);
    const DenseTensor y_hat = DenseTensor::random_uniform({2, 3, 3}, 11, 0.0, 1.0);
    double sq = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i)
        sq += (y_true[i] - y_hat[i]) * (y_true[i] - y_hat[i]);
    EXPECT_NEAR(entf::mse_y(y_true, y_hat, {0, 1}, 7), std::sqrt(sq) / (7.0 * 9.0), 1e-14);
    EXPECT_THROW(entf::mse_y(y_true, y_hat, {0}, 7), entf::ShapeError);
}

TEST(Report, EvaluationResolvesPermutationAmbiguity) {
    const std::size_t bands = 10, r = 3;
    const DenseTensor x_true = DenseTensor::random_uniform({bands, r}, 12, 0.1, 1.0);
    const DenseTensor y_true = DenseTensor::random_uniform({r, 4, 4}, 13, 0.0, 1.0);
    const DenseTensor cube = entf::einstein_product(x_true, y_true, 1);

    // Estimate = truth with permuted endmembers: all metrics must be zero.
    const std::size_t shuffle[3] = {2, 0, 1};
    DenseTensor x_hat({bands, r});
    DenseTensor y_hat({r, 4, 4});
    for (std::size_t j = 0; j < r; ++j) {
        for (std::size_t b = 0; b < bands; ++b)
            x_hat(b, shuffle[j]) = x_true(b, j);
        for (std::size_t px = 0; px < 16; ++px)
            y_hat[shuffle[j] * 16 + px] = y_true[j * 16 + px];
    }
    const DenseTensor cube_hat = entf::einstein_product(x_hat, y_hat, 1);

    const entf::UnmixReport report =
        entf::evaluate_unmixing(cube, cube_hat, x_true, x_hat, y_true, y_hat);
    EXPECT_NEAR(report.mse, 0.0, 1e-14);
    EXPECT_NEAR(report.sam_mean, 0.0, 1e-7);
    EXPECT_NEAR(report.mse_y, 0.0, 1e-14);
    for (std::size_t i = 0; i < r; ++i)
        EXPECT_EQ(report.permutation[i], shuffle[i]);

    // sam_mean is the arithmetic mean of the per-endmember angles.
    double mean = 0.0;
    for (double v : report.sam_per_endmember)
        mean += v;
    EXPECT_NEAR(report.sam_mean, mean / static_cast<double>(r), 1e-15);
}

TEST(Report, SerializesToCsvAndJson) {
    entf::UnmixReport report;
    report.mse = 0.25;
    report.sam_per_endmember = {0.125, 0.375};
    report.sam_mean = 0.25;
    report.mse_y = 0.5;
    report.permutation = {1, 0};

    const std::string csv = report.to_csv();
    EXPECT_NE(csv.find("mse,sam_mean,mse_y,sam_0,sam_1,perm_0,perm_1"), std::string::npos);
    EXPECT_NE(csv.find("0.25,0.25,0.5,0.125,0.375,1,0"), std::string::npos);

    const nlohmann::json j = report.to_json();
    EXPECT_EQ(j.at("mse").get<double>(), 0.25);
    EXPECT_EQ(j.at("permutation").at(0).get<std::size_t>(), 1u);
}
