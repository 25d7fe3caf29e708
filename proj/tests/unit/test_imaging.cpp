#include <gtest/gtest.h>

#include "histolime/codec.hpp"
#include "histolime/errors.hpp"
#include "histolime/imaging.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace histolime {
namespace {

using testing::random_raster;
using testing::TempDir;

TEST(Raster, RejectsBadShapes) {
  EXPECT_THROW(Raster(0, 3), ShapeError);
  EXPECT_THROW(Raster(2, 2, std::vector<std::uint8_t>(11)), ShapeError);
  Raster r(2, 3);
  EXPECT_EQ(r.data().size(), 2u * 3u * 3u);
}

TEST(Codec, DecodesOneWhitePixelPng) {
  const Raster white(1, 1, Rgb{255, 255, 255});
  const auto png = encode_image(white, ImageFormat::Png);
  const Raster back = decode_image(png);
  EXPECT_EQ(back.width(), 1);
  EXPECT_EQ(back.height(), 1);
  EXPECT_EQ(std::vector<std::uint8_t>(back.data().begin(), back.data().end()),
            (std::vector<std::uint8_t>{255, 255, 255}));
}

TEST(Codec, DecodesRowMajorRgb) {
  Raster two(2, 1);
  two.set(0, 0, {255, 0, 0});
  two.set(1, 0, {0, 0, 255});
  const Raster back = decode_image(encode_image(two, ImageFormat::Png));
  EXPECT_EQ(std::vector<std::uint8_t>(back.data().begin(), back.data().end()),
            (std::vector<std::uint8_t>{255, 0, 0, 0, 0, 255}));
}

TEST(Codec, PngRoundTripIsLosslessOverRandomCorpus) {
  SplitMix64 rng(7);
  for (int i = 0; i < 10; ++i) {
    const Raster img = random_raster(rng, 40);
    EXPECT_EQ(decode_image(encode_image(img, ImageFormat::Png)), img);
  }
}

TEST(Codec, JpegReencodeDecodesOverCorpus) {
  SplitMix64 rng(11);
  for (int i = 0; i < 12; ++i) {
    const Raster img = random_raster(rng, 48);
    const Raster once = decode_image(encode_image(img, ImageFormat::Jpeg));
    EXPECT_EQ(once.width(), img.width());
    EXPECT_EQ(once.height(), img.height());
    const Raster twice = decode_image(encode_image(once, ImageFormat::Jpeg));
    EXPECT_EQ(twice.width(), img.width());
  }
}

TEST(Codec, OnePixelJpegIsDecodable) {
  const auto bytes = encode_image(Raster(1, 1, Rgb{10, 20, 30}), ImageFormat::Jpeg);
  EXPECT_NO_THROW(decode_image(bytes));
}

TEST(Codec, ErrorPaths) {
  const std::vector<std::uint8_t> gif = {'G', 'I', 'F', '8', '9', 'a', 0, 0};
  EXPECT_THROW(decode_image(gif), UnsupportedFormat);
  EXPECT_THROW(decode_image(std::vector<std::uint8_t>{}), DecodeError);

  auto png = encode_image(Raster(4, 4, Rgb{1, 2, 3}), ImageFormat::Png);
  png.resize(png.size() / 2);
  EXPECT_THROW(decode_image(png), DecodeError);

  auto jpg = encode_image(Raster(16, 16, Rgb{1, 2, 3}), ImageFormat::Jpeg);
  jpg.resize(20);
  EXPECT_THROW(decode_image(jpg), DecodeError);

  EXPECT_THROW(format_from_extension("x.bmp"), UnsupportedFormat);
  EXPECT_EQ(format_from_extension("x.JPEG"), ImageFormat::Jpeg);
}

TEST(Codec, WriteImageIsAtomicAndReadable) {
  TempDir dir;
  const Raster img(3, 2, Rgb{9, 8, 7});
  write_image(dir / "a.png", img);
  EXPECT_EQ(read_image(dir / "a.png"), img);
  EXPECT_FALSE(std::filesystem::exists(dir / "a.png.tmp"));
  EXPECT_THROW(write_image(dir / "missing/dir/a.png", img), EncodeError);
}

TEST(Resize, IdentityAtTargetSize) {
  SplitMix64 rng(3);
  std::vector<std::uint8_t> data(224 * 224 * 3);
  for (auto& v : data) v = static_cast<std::uint8_t>(rng.next());
  const Raster img(224, 224, data);
  EXPECT_EQ(resize_to_input(img, 224), img);
}

TEST(Resize, ConstantFieldStaysConstant) {
  const Raster gray(448, 448, Rgb{128, 128, 128});
  EXPECT_EQ(resize_to_input(gray, 224), Raster(224, 224, Rgb{128, 128, 128}));
}

TEST(Resize, MatchesRationalOracleOnTwoToneImage) {
  Raster img(300, 200);
  for (int y = 0; y < 200; ++y) {
    for (int x = 0; x < 300; ++x) {
      img.set(x, y, (x / 37 + y / 23) % 2 ? Rgb{250, 20, 90} : Rgb{10, 200, 40});
    }
  }
  const Raster got = resize_to_input(img, 224);
  const Raster want = oracle::rational_bilinear_resize(img, 224);
  ASSERT_EQ(got.width(), 224);
  ASSERT_EQ(got.height(), 224);
  for (std::size_t i = 0; i < got.data().size(); ++i) {
    ASSERT_LE(std::abs(int(got.data()[i]) - int(want.data()[i])), 1) << "sample " << i;
  }
}

TEST(Resize, DeterministicAndOracleAgreesOnRandomShapes) {
  SplitMix64 rng(99);
  for (int i = 0; i < 30; ++i) {
    const Raster img = random_raster(rng, 60);
    const int side = 1 + static_cast<int>(rng.below(50));
    const Raster a = resize_to_input(img, side);
    EXPECT_EQ(a, resize_to_input(img, side));
    const Raster want = oracle::rational_bilinear_resize(img, side);
    for (std::size_t j = 0; j < a.data().size(); ++j) {
      ASSERT_LE(std::abs(int(a.data()[j]) - int(want.data()[j])), 1);
    }
  }
  EXPECT_THROW(resize_to_input(Raster(2, 2), 0), ShapeError);
}

TEST(Augment, FlipIsAnInvolution) {
  SplitMix64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const Raster img = random_raster(rng);
    const Raster once = augment(img, AugmentSpec::flip());
    EXPECT_EQ(augment(once, AugmentSpec::flip()), img);
    EXPECT_EQ(once.at(0, 0), img.at(img.width() - 1, 0));
  }
}

TEST(Augment, ZeroShiftIsIdentity) {
  SplitMix64 rng(6);
  const Raster img = random_raster(rng);
  EXPECT_EQ(augment(img, AugmentSpec::shift(0.0, 0.0)), img);
}

TEST(Augment, QuarterShiftMovesOneColumnOnFourByFour) {
  Raster img(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      img.set(x, y, {static_cast<std::uint8_t>(10 + x), static_cast<std::uint8_t>(50 + y), 200});
    }
  }
  const Raster out = augment(img, AugmentSpec::shift(0.25, 0.0));
  for (int y = 0; y < 4; ++y) {
    EXPECT_EQ(out.at(0, y), (Rgb{0, 0, 0}));
    for (int x = 1; x < 4; ++x) EXPECT_EQ(out.at(x, y), img.at(x - 1, y));
  }
}

TEST(Augment, ZoomFixesConstantRasterWithMatchingFill) {
  const Rgb c{17, 99, 203};
  const Raster img(31, 17, c);
  for (double f : {0.51, 0.8, 1.0, 1.3, 2.0}) {
    EXPECT_EQ(augment(img, AugmentSpec::zoom(f, c)), img) << f;
  }
}

TEST(Augment, ZoomOutPadsWithFill) {
  const Raster img(20, 20, Rgb{200, 200, 200});
  const Raster out = augment(img, AugmentSpec::zoom(0.6, Rgb{0, 0, 0}));
  EXPECT_EQ(out.at(0, 0), (Rgb{0, 0, 0}));
  EXPECT_EQ(out.at(10, 10), (Rgb{200, 200, 200}));
}

TEST(Augment, RejectsOutOfRangeSpecs) {
  const Raster img(4, 4);
  EXPECT_THROW(augment(img, AugmentSpec::zoom(0.5)), InvalidAugmentSpec);
  EXPECT_THROW(augment(img, AugmentSpec::zoom(2.01)), InvalidAugmentSpec);
  EXPECT_THROW(augment(img, AugmentSpec::shift(0.6, 0.0)), InvalidAugmentSpec);
  EXPECT_THROW(augment(img, AugmentSpec::shift(0.0, -0.51)), InvalidAugmentSpec);
  EXPECT_NO_THROW(augment(img, AugmentSpec::zoom(2.0)));
}

TEST(Augment, FuzzedSpecsKeepLengthInvariant) {
  SplitMix64 rng(21);
  for (int i = 0; i < 300; ++i) {
    const Raster img = random_raster(rng, 24);
    AugmentSpec spec;
    switch (rng.below(3)) {
      case 0:
        spec = AugmentSpec::flip();
        break;
      case 1:
        spec = AugmentSpec::shift(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
        break;
      default:
        spec = AugmentSpec::zoom(rng.uniform(0.5001, 2.0));
        break;
    }
    const Raster out = augment(img, spec);
    ASSERT_EQ(out.width(), img.width());
    ASSERT_EQ(out.height(), img.height());
    ASSERT_EQ(out.data().size(), out.pixel_count() * 3);
    ASSERT_EQ(out, augment(img, spec));
  }
}

TEST(AugmentPolicy, SampledChainsStayInRangeAndAreSeeded) {
  AugmentPolicy policy;
  SplitMix64 a(42), b(42);
  int flips = 0;
  for (int i = 0; i < 400; ++i) {
    const auto chain = policy.sample(a);
    const auto again = policy.sample(b);
    ASSERT_EQ(chain.size(), again.size());
    flips += chain.front().op == AugmentOp::FlipHorizontal;
    for (const auto& s : chain) {
      EXPECT_NO_THROW(validate(s));
      if (s.op == AugmentOp::Shift) {
        EXPECT_LE(std::abs(s.dx), 0.1);
        EXPECT_LE(std::abs(s.dy), 0.1);
      }
      if (s.op == AugmentOp::Zoom) {
        EXPECT_GE(s.factor, 0.9);
        EXPECT_LE(s.factor, 1.1);
      }
    }
  }
  EXPECT_GT(flips, 150);
  EXPECT_LT(flips, 250);
}

}  // namespace
}  // namespace histolime
