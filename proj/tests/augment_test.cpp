#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "xrv/augment.hpp"

using namespace xrv;

namespace {

Tensor<float> random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> pix(h * w * 3);
    for (float& v : pix) v = static_cast<float>(rng.next_double());
    return Tensor<float>::from_data({h, w, 3}, std::move(pix));
}

void expect_in_unit_range(const Tensor<float>& img) {
    for (float v : img.data()) {
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
    }
}

}  // namespace

TEST(Rotate, ZeroDegreesIsBitIdentical) {
    const auto img = random_image(7, 5, 1);
    EXPECT_EQ(rotate(img, 0.0).data(), img.data());
}

TEST(Rotate, FourQuarterTurnsReturnToStart) {
    const auto img = random_image(8, 8, 2);
    Tensor<float> r = img.clone();
    for (int i = 0; i < 4; ++i) r = rotate(r, 90.0);
    ASSERT_EQ(r.shape(), img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) ASSERT_NEAR(r.data()[i], img.data()[i], 1e-6);
}

TEST(Rotate, OutputStaysInUnitRange) {
    expect_in_unit_range(rotate(random_image(9, 9, 3), 37.5));
}

TEST(ScaleCropTranslate, IdentityParameterCases) {
    const auto img = random_image(6, 6, 4);
    EXPECT_EQ(scale(img, 1.0).data(), img.data());
    EXPECT_EQ(crop(img, 0, 0, 6, 6).data(), img.data());
    EXPECT_EQ(translate(img, 0, 0).data(), img.data());
}

TEST(Crop, QuadrantFillsFrameOnBlockImage) {
    // 4x4 image whose top-left 2x2 quadrant is a solid color
    std::vector<float> pix(4 * 4 * 3, 0.25f);
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 2; ++x)
            for (std::size_t c = 0; c < 3; ++c) pix[(y * 4 + x) * 3 + c] = 0.75f;
    const auto img = Tensor<float>::from_data({4, 4, 3}, std::move(pix));

    const auto cropped = crop(img, 0, 0, 2, 2);
    ASSERT_EQ(cropped.shape(), img.shape());
    for (float v : cropped.data()) EXPECT_FLOAT_EQ(v, 0.75f);
}

TEST(Crop, InvalidRegionsRejected) {
    const auto img = random_image(4, 4, 5);
    EXPECT_THROW(crop(img, 0, 0, 0, 2), ContractError);
    EXPECT_THROW(crop(img, 3, 3, 2, 2), ContractError);
}

TEST(Translate, ColumnShiftMatchesIndexOracle) {
    const auto img = random_image(3, 3, 6);
    const auto shifted = translate(img, 1, 0);
    for (std::size_t y = 0; y < 3; ++y) {
        for (std::size_t c = 0; c < 3; ++c) {
            EXPECT_FLOAT_EQ(shifted.data()[(y * 3 + 0) * 3 + c], 0.0f);  // vacated column
            for (std::size_t x = 1; x < 3; ++x) {
                EXPECT_FLOAT_EQ(shifted.data()[(y * 3 + x) * 3 + c], img.data()[(y * 3 + x - 1) * 3 + c]);
            }
        }
    }
    EXPECT_THROW(translate(img, 3, 0), ContractError);
}

TEST(Flip, InvolutionAndDefinition) {
    const auto img = random_image(5, 4, 7);
    EXPECT_EQ(flip(flip(img, FlipAxis::horizontal), FlipAxis::horizontal).data(), img.data());
    EXPECT_EQ(flip(flip(img, FlipAxis::vertical), FlipAxis::vertical).data(), img.data());

    const auto small = Tensor<float>::from_data({2, 2, 1}, {1, 2, 3, 4});
    EXPECT_EQ(flip(small, FlipAxis::horizontal).data(), (std::vector<float>{2, 1, 4, 3}));
    EXPECT_EQ(flip(small, FlipAxis::vertical).data(), (std::vector<float>{3, 4, 1, 2}));

    // sigma-0 noise is the identity, so it commutes with flips
    EXPECT_EQ(flip(gaussian_noise(img, 0.0, 1), FlipAxis::horizontal).data(),
              gaussian_noise(flip(img, FlipAxis::horizontal), 0.0, 1).data());
}

TEST(GaussianNoise, ZeroSigmaAndDeterminism) {
    const auto img = random_image(6, 6, 8);
    EXPECT_EQ(gaussian_noise(img, 0.0, 9).data(), img.data());
    EXPECT_EQ(gaussian_noise(img, 0.05, 9).data(), gaussian_noise(img, 0.05, 9).data());
    EXPECT_NE(gaussian_noise(img, 0.05, 9).data(), gaussian_noise(img, 0.05, 10).data());
    expect_in_unit_range(gaussian_noise(img, 0.3, 11));
}

TEST(GaussianNoise, SampleMeanNearZero) {
    // mid-gray keeps the clamp inactive, so added noise is unbiased
    const auto img = Tensor<float>::full({256, 256, 3}, 0.5f);
    const double sigma = 0.03;
    const auto noisy = gaussian_noise(img, sigma, 12);
    double mean = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        mean += static_cast<double>(noisy.data()[i]) - 0.5;
    }
    mean /= static_cast<double>(img.size());
    EXPECT_LE(std::abs(mean), 3.0 * sigma / 256.0);
}

TEST(Distort, ZeroMagnitudeAndDeterminism) {
    const auto img = random_image(7, 7, 13);
    EXPECT_EQ(distort(img, 0.0, 14).data(), img.data());
    EXPECT_EQ(distort(img, 0.2, 14).data(), distort(img, 0.2, 14).data());
    const auto warped = distort(img, 0.2, 15);
    EXPECT_EQ(warped.shape(), img.shape());
    expect_in_unit_range(warped);
}

TEST(AugmentPlan, TransformCountsMatchModes) {
    AugmentPlan full;
    full.mode = AugmentMode::full;
    EXPECT_EQ(full.transforms().size(), 8u);
    EXPECT_EQ(full.multiplicity(), 8u);

    AugmentPlan reduced;
    reduced.mode = AugmentMode::reduced;
    EXPECT_EQ(reduced.transforms().size(), 4u);
    EXPECT_EQ(reduced.multiplicity(), 4u);
}

TEST(AugmentDataset, CountArithmetic) {
    const Dataset ds447 = testutil::make_random_dataset({83, 217, 71, 76}, 8, 8, 16);  // 447 total
    ASSERT_EQ(ds447.size(), 447u);

    AugmentPlan reduced;
    reduced.mode = AugmentMode::reduced;
    reduced.seed = 1;
    EXPECT_EQ(augment_dataset(ds447, reduced).size(), 2235u);

    AugmentPlan full;
    full.mode = AugmentMode::full;
    full.seed = 1;
    EXPECT_EQ(augment_dataset(ds447, full).size(), 4023u);

    const Dataset empty{{}, {"a", "b"}};
    EXPECT_EQ(augment_dataset(empty, full).size(), 0u);
}

TEST(AugmentDataset, LabelHistogramScalesByMultiplicity) {
    const Dataset ds = testutil::make_random_dataset({5, 9, 2}, 6, 6, 17);
    AugmentPlan plan;
    plan.mode = AugmentMode::full;
    plan.seed = 2;
    const Dataset out = augment_dataset(ds, plan);
    const auto before = class_distribution(ds);
    const auto after = class_distribution(out);
    for (std::size_t c = 0; c < before.size(); ++c) EXPECT_EQ(after[c], before[c] * 9);
}

TEST(AugmentDataset, OutputsPreserveDimsAndRange) {
    const Dataset ds = testutil::make_random_dataset({3, 3}, 10, 12, 18);
    AugmentPlan plan;
    plan.mode = AugmentMode::full;
    plan.seed = 3;
    const Dataset out = augment_dataset(ds, plan);
    for (const auto& im : out.images) {
        ASSERT_EQ(im.pixels.shape(), (Shape{10, 12, 3}));
        expect_in_unit_range(im.pixels);
    }
}

TEST(AugmentDataset, FullyDeterministicAndOrderIndependent) {
    const Dataset ds = testutil::make_random_dataset({4, 4}, 8, 8, 19);
    AugmentPlan plan;
    plan.mode = AugmentMode::full;
    plan.seed = 77;

    const Dataset a = augment_dataset(ds, plan);
    const Dataset b = augment_dataset(ds, plan);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a.images[i].pixels.data(), b.images[i].pixels.data());
    }

    // sub-seeds are index-derived: variant t of image i matches a direct call
    const auto kinds = plan.transforms();
    for (std::size_t i : {std::size_t{1}, std::size_t{6}}) {
        const auto variants = augment_variants(ds.images[i].pixels, plan, i);
        for (std::size_t t = 0; t < kinds.size(); ++t) {
            const auto direct = apply_transform(ds.images[i].pixels, kinds[t], plan.ranges,
                                                mix_seed(mix_seed(plan.seed, i), t));
            ASSERT_EQ(variants[t].data(), direct.data());
        }
    }

    AugmentPlan other = plan;
    other.seed = 78;
    const Dataset c = augment_dataset(ds, other);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i) {
        any_diff = a.images[i].pixels.data() != c.images[i].pixels.data();
    }
    EXPECT_TRUE(any_diff);
}

TEST(AugmentDataset, VariantSourceNamesCarrySuffix) {
    const Dataset ds = testutil::make_random_dataset({1}, 4, 4, 20);
    AugmentPlan plan;
    plan.mode = AugmentMode::reduced;
    plan.seed = 5;
    const Dataset out = augment_dataset(ds, plan);
    ASSERT_EQ(out.size(), 5u);
    EXPECT_EQ(out.images[0].source, "class0/img0.png");
    EXPECT_EQ(out.images[1].source, "class0/img0_aug1.png");
    EXPECT_EQ(out.images[4].source, "class0/img0_aug4.png");
}
