#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "predbio/csv.hpp"
#include "predbio/datasets.hpp"
#include "predbio/error.hpp"
#include "predbio/image_io.hpp"
#include "test_util.hpp"

using namespace predbio;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST(Digits, SynthesizedClassesAndRange) {
  const auto d = synthesize_digits(200, 28, 1);
  ASSERT_EQ(d.images.shape(), (Shape{200, 1, 28, 28}));
  std::vector<int> counts(10, 0);
  for (int l : d.labels) ++counts.at(static_cast<std::size_t>(l));
  for (int c : counts) EXPECT_GT(c, 5);
  for (double v : d.images.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  // Every glyph leaves ink on the canvas and a clear border.
  for (std::size_t i = 0; i < 200; ++i) {
    double ink = 0;
    for (double v : d.images.sample(i)) ink += v;
    EXPECT_GT(ink, 20.0);
  }
}

TEST(Digits, SynthesisDeterministic) {
  const auto a = synthesize_digits(30, 28, 5);
  const auto b = synthesize_digits(30, 28, 5);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE(std::equal(a.images.values().begin(), a.images.values().end(),
                         b.images.values().begin()));
}

TEST(ColoredDigits, CircleConvention) {
  const auto src = synthesize_digits(300, 28, 2);
  const auto c = render_colored_digits(src, ColoredDigitSpec{}, 3);
  for (std::size_t i = 0; i < c.digits.size(); ++i) {
    const int d = c.digits[i];
    const bool circle = d == 0 || d == 6 || d == 8 || d == 9;
    EXPECT_EQ(c.x_circle[i], circle ? 1.0 : 0.0) << "digit " << d;
  }
}

TEST(ColoredDigits, GreenFraction) {
  const auto src = synthesize_digits(1000, 28, 4);
  const auto c = render_colored_digits(src, ColoredDigitSpec{}, 4);
  double green = 0;
  for (double v : c.x_color) green += v;
  EXPECT_GE(green / 1000, 0.45);
  EXPECT_LE(green / 1000, 0.55);
}

TEST(ColoredDigits, ColorAndCircleNearlyUncorrelated) {
  const auto src = synthesize_digits(2000, 28, 6);
  const auto c = render_colored_digits(src, ColoredDigitSpec{}, 6);
  EXPECT_LT(std::abs(pearson_correlation(c.x_color, c.x_circle)), 0.1);
}

TEST(ColoredDigits, InkOnlyInTheColourChannel) {
  const auto src = synthesize_digits(40, 28, 8);
  const auto c = render_colored_digits(src, ColoredDigitSpec{}, 8);
  const std::size_t plane = 28 * 28;
  for (std::size_t i = 0; i < 40; ++i) {
    const auto img = c.images.sample(i);
    const std::size_t on = c.x_color[i] == 1.0 ? 1 : 0;
    const std::size_t off = 1 - on;
    double ink_on = 0, ink_off = 0, ink_blue = 0;
    for (std::size_t p = 0; p < plane; ++p) {
      ink_on += img[on * plane + p];
      ink_off += img[off * plane + p];
      ink_blue += img[2 * plane + p];
    }
    EXPECT_GT(ink_on, 0.0);
    EXPECT_EQ(ink_off, 0.0);
    EXPECT_EQ(ink_blue, 0.0);
  }
}

TEST(ColoredDigits, ManifestRolesFollowFeatureSet) {
  const auto src = synthesize_digits(50, 28, 9);
  ColoredDigitSpec a;
  ColoredDigitSpec b;
  b.prognostic = ColoredFeature::circle;
  const auto ca = render_colored_digits(src, a, 1);
  const auto cb = render_colored_digits(src, b, 1);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(ca.manifest.rows[i].x_prog, ca.x_color[i]);
    EXPECT_EQ(ca.manifest.rows[i].x_pred, ca.x_circle[i]);
    EXPECT_EQ(cb.manifest.rows[i].x_prog, cb.x_circle[i]);
    EXPECT_EQ(cb.manifest.rows[i].x_pred, cb.x_color[i]);
  }
}

TEST(ColoredDigits, GenerationIsIdempotent) {
  const auto src = synthesize_digits(60, 28, 10);
  const std::vector<double> fractions{0.6, 0.2, 0.2};
  const auto d1 = testutil::temp_dir("gen1");
  const auto d2 = testutil::temp_dir("gen2");
  const auto g1 = generate_colored_digits(src, ColoredDigitSpec{}, 12, d1, fractions);
  generate_colored_digits(src, ColoredDigitSpec{}, 12, d2, fractions);
  generate_colored_digits(src, ColoredDigitSpec{}, 12, d2, fractions);
  EXPECT_EQ(slurp(d1 / "manifest.csv"), slurp(d2 / "manifest.csv"));
  EXPECT_EQ(slurp(d1 / "annotations.csv"), slurp(d2 / "annotations.csv"));
  const auto& row = g1.manifest.rows.front();
  EXPECT_EQ(slurp(d1 / row.image_path), slurp(d2 / row.image_path));

  const auto manifest = read_manifest(d1 / "manifest.csv");
  EXPECT_EQ(manifest.size(), 60u);
  EXPECT_EQ(manifest.indices(Split::train).size(), 36u);
  EXPECT_EQ(manifest.indices(Split::val).size(), 12u);
  EXPECT_EQ(manifest.indices(Split::test).size(), 12u);

  // Images read back from disk match the in-memory rendering to 8-bit precision.
  const Tensor images = load_images(manifest);
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& id = manifest.rows[i].sample_id;
    const auto j = static_cast<std::size_t>(
        std::find(g1.sample_ids.begin(), g1.sample_ids.end(), id) - g1.sample_ids.begin());
    auto a = images.sample(i);
    auto b = g1.images.sample(j);
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_NEAR(a[k], b[k], 0.5 / 255 + 1e-12);
  }
}

TEST(Annotations, MinMaxNormalizationUsesTrainSplit) {
  const auto dir = testutil::temp_dir("annot_norm");
  write_text(dir / "table.csv",
             "sample_id,image_path,size,flag,split\n"
             "a,a.png,10,1,train\n"
             "b,b.png,30,0,train\n"
             "c,c.png,20,1,train\n"
             "d,d.png,40,0,test\n");
  const auto m = load_annotation_table(dir / "table.csv", "size", "flag", true, false);
  EXPECT_DOUBLE_EQ(m.rows[0].x_prog, 0.0);
  EXPECT_DOUBLE_EQ(m.rows[1].x_prog, 1.0);
  EXPECT_DOUBLE_EQ(m.rows[2].x_prog, 0.5);
  EXPECT_DOUBLE_EQ(m.rows[3].x_prog, 1.0);  // clamped
  EXPECT_EQ(m.rows[2].x_pred, 1.0);
  EXPECT_EQ(m.rows[3].split, Split::test);
}

TEST(Annotations, MissingColumnNamed) {
  const auto dir = testutil::temp_dir("annot_missing");
  write_text(dir / "table.csv", "sample_id,image_path,size\na,a.png,1\n");
  try {
    load_annotation_table(dir / "table.csv", "size", "melanoma", true, false);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_column);
    EXPECT_NE(std::string(e.what()).find("melanoma"), std::string::npos);
  }
}

TEST(Annotations, NonNumericAndConstantColumnsRejected) {
  const auto dir = testutil::temp_dir("annot_bad");
  write_text(dir / "t1.csv", "sample_id,image_path,p,q\na,a.png,1,x\nb,b.png,2,1\n");
  try {
    load_annotation_table(dir / "t1.csv", "p", "q", true, false);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_numeric);
    EXPECT_NE(std::string(e.what()).find("q"), std::string::npos);
  }
  write_text(dir / "t2.csv", "sample_id,image_path,p,q\na,a.png,3,0\nb,b.png,3,1\n");
  try {
    load_annotation_table(dir / "t2.csv", "p", "q", true, false);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::zero_range);
  }
}

TEST(Annotations, DuplicateIdsRejected) {
  const auto dir = testutil::temp_dir("annot_dup");
  write_text(dir / "t.csv", "sample_id,image_path,p,q\na,a.png,0,1\na,b.png,1,0\n");
  try {
    load_annotation_table(dir / "t.csv", "p", "q", false, false);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::duplicate_id);
  }
}

TEST(Splits, EightyTwenty) {
  DatasetManifest m;
  for (int i = 0; i < 100; ++i) m.rows.push_back({"s" + std::to_string(i), "", 0, 1, Split::train});
  const std::vector<double> f{0.8, 0.2};
  const auto s = split_dataset(m, f, 3);
  EXPECT_EQ(s.indices(Split::train).size(), 80u);
  EXPECT_EQ(s.indices(Split::val).size(), 20u);
  EXPECT_EQ(split_dataset(m, f, 3).rows, s.rows);
  EXPECT_NE(split_dataset(m, f, 4).rows, s.rows);
  const std::vector<double> bad{0.5, 0.4};
  EXPECT_THROW(split_dataset(m, bad, 1), Error);
}

TEST(Manifest, RoundTripAndSwap) {
  DatasetManifest m;
  m.rows = {{"x1", "img/x1.png", 0.25, 1, Split::train}, {"x,2", "img/x2.png", 1, 0, Split::test}};
  const auto dir = testutil::temp_dir("manifest");
  write_manifest(m, dir / "manifest.csv");
  const auto back = read_manifest(dir / "manifest.csv", false);
  EXPECT_EQ(back.rows, m.rows);
  const auto swapped = m.swapped_roles();
  EXPECT_EQ(swapped.rows[0].x_prog, 1.0);
  EXPECT_EQ(swapped.rows[0].x_pred, 0.25);
}

TEST(Csv, QuotedFields) {
  const auto t = CsvTable::parse("a,b\n\"x, y\",\"he said \"\"hi\"\"\"\n", "inline");
  EXPECT_EQ(t.at(0, t.column("a")), "x, y");
  EXPECT_EQ(t.at(0, t.column("b")), "he said \"hi\"");
}

TEST(ImageIo, PngRoundTrip) {
  Image8 img{5, 3, 3, {}};
  for (std::size_t i = 0; i < 45; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 5));
  const auto dir = testutil::temp_dir("png");
  write_png(dir / "x.png", img);
  const auto back = read_png(dir / "x.png");
  EXPECT_EQ(back.width, 5u);
  EXPECT_EQ(back.height, 3u);
  EXPECT_EQ(back.channels, 3u);
  EXPECT_EQ(back.pixels, img.pixels);
}
