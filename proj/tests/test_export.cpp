#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sdmlp/export.hpp"
#include "test_util.hpp"

using namespace sdmlp;
using sdmlp::testing::read_lines;
using sdmlp::testing::TempDir;

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, sep);) out.push_back(f);
  return out;
}

} // namespace

TEST(FormatNumber, Examples) {
  EXPECT_EQ(format_number(1.5, 6), "1.5");
  EXPECT_EQ(format_number(-0.25, 17), "-0.25");
  EXPECT_EQ(format_number(123456789.0, 6), "1.23457e+08");
  EXPECT_EQ(format_number(0.1, 17), "0.10000000000000001");
  EXPECT_EQ(std::stod(format_number(M_PI, 17)), M_PI);
}

TEST(WritePly, ColoredHeaderAndBody) {
  TempDir dir("ply");
  PointCloud c;
  c.points = {{1.0, 2.0, 3.0}, {-0.5, 0.25, 1e-3}};
  c.colors = {{255, 0, 10}, {1, 2, 3}};
  write_ply(c, dir / "c.ply");
  const auto lines = read_lines(dir / "c.ply");
  const std::vector<std::string> expected{
      "ply",
      "format ascii 1.0",
      "element vertex 2",
      "property float x",
      "property float y",
      "property float z",
      "property uchar red",
      "property uchar green",
      "property uchar blue",
      "end_header",
      "1 2 3 255 0 10",
      "-0.5 0.25 0.001 1 2 3",
  };
  EXPECT_EQ(lines, expected);
}

TEST(WritePly, UncoloredAndEmpty) {
  TempDir dir("ply_plain");
  PointCloud c;
  write_ply(c, dir / "e.ply");
  auto lines = read_lines(dir / "e.ply");
  EXPECT_EQ(lines[2], "element vertex 0");
  EXPECT_EQ(lines.back(), "end_header");

  c.points = {{1, 1, 1}};
  write_ply(c, dir / "p.ply");
  lines = read_lines(dir / "p.ply");
  EXPECT_EQ(lines.size(), 8u);
  EXPECT_EQ(lines.back(), "1 1 1");

  c.colors = {{0, 0, 0}, {0, 0, 0}};
  EXPECT_THROW(write_ply(c, dir / "bad.ply"), InvalidArgument);
  EXPECT_THROW(write_ply(PointCloud{}, dir / "missing" / "x.ply"), IoError);
}

TEST(WritePly, FullFrameVertexCountAndDeterminism) {
  TempDir dir("ply_frame");
  PointCloud c;
  SeededRng rng(1);
  for (std::size_t i = 0; i < 103680; ++i) {
    c.points.push_back({rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(0, 200)});
    c.colors.push_back({static_cast<std::uint8_t>(rng.below(256)), 0, 0});
  }
  write_ply(c, dir / "a.ply");
  write_ply(c, dir / "b.ply");
  const auto lines = read_lines(dir / "a.ply");
  EXPECT_EQ(lines[2], "element vertex 103680");
  EXPECT_EQ(lines.size(), 10u + 103680u);
  EXPECT_EQ(sdmlp::testing::read_bytes(dir / "a.ply"), sdmlp::testing::read_bytes(dir / "b.ply"));
  // Six significant digits: values parse back within float-like precision.
  const auto f = split(lines[10], ' ');
  ASSERT_EQ(f.size(), 6u);
  EXPECT_NEAR(std::stod(f[0]), c.points[0][0], 1e-5 * std::abs(c.points[0][0]) + 1e-9);
}

TEST(WriteCsvLosses, Layout) {
  TempDir dir("losses");
  TrainReport r;
  r.epoch_mse = {0.5, 0.25};
  r.epoch_l2 = {0.01, 0.02};
  r.wall_ms = {12.3456, 7.0};
  write_csv_losses(r, dir / "with.csv");
  write_csv_losses(r, dir / "without.csv", false);
  EXPECT_EQ(read_lines(dir / "with.csv"),
            (std::vector<std::string>{"epoch,mse,l2,wall_ms", "1,0.5,0.01,12.346", "2,0.25,0.02,7"}));
  EXPECT_EQ(read_lines(dir / "without.csv"),
            (std::vector<std::string>{"epoch,mse,l2,wall_ms", "1,0.5,0.01,0", "2,0.25,0.02,0"}));
}

TEST(WriteCsvEval, RecordsMeanAndHistogram) {
  TempDir dir("eval_csv");
  std::vector<EvalRecord> recs(3);
  recs[0].frame_index = 5;
  recs[0].rmse = 3.0;
  recs[0].n_pixels = 10;
  recs[1].frame_index = 2;
  recs[1].rmse = 1.0;
  recs[1].n_pixels = 20;
  recs[2].frame_index = 9;
  recs[2].rmse = 2.0;
  recs[2].n_pixels = 30;
  const std::vector<double> values{3.0, 1.0, 2.0};
  const Histogram h = histogram(values, 2);
  write_csv_eval(recs, h, dir / "r.csv", dir / "h.csv");
  EXPECT_EQ(read_lines(dir / "r.csv"),
            (std::vector<std::string>{"frame,rmse,n_pixels", "2,1,20", "5,3,10", "9,2,30",
                                      "mean,2,"}));
  EXPECT_EQ(read_lines(dir / "h.csv"),
            (std::vector<std::string>{"bin_lo,bin_hi,count", "1,2,1", "2,3,2"}));
  EXPECT_THROW(write_csv_eval({}, h, dir / "r.csv", dir / "h.csv"), InvalidArgument);
}

TEST(DepthPreview, NormalizesZ) {
  DepthMap d(3, 1);
  d.set(0, {0, 0, -1});
  d.set(1, {0, 0, 3});
  const Image img = depth_preview(d);
  EXPECT_EQ(img.channels, 1u);
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{0, 255, 0}));

  DepthMap flat(2, 1);
  flat.set(0, {0, 0, 4});
  flat.set(1, {1, 1, 4});
  EXPECT_EQ(depth_preview(flat).pixels, (std::vector<std::uint8_t>{128, 128}));

  EXPECT_THROW(depth_preview(DepthMap(2, 2)), InvalidArgument);
}

TEST(DepthPreview, PngRoundTrip) {
  TempDir dir("preview");
  DepthMap d(4, 3);
  for (std::size_t p = 0; p < 12; ++p) d.set(p, {0, 0, static_cast<double>(p)});
  write_depth_png(d, dir / "z.png");
  const Image back = read_image(dir / "z.png");
  EXPECT_EQ(back.width, 4u);
  EXPECT_EQ(back.height, 3u);
  EXPECT_EQ(back.pixels, depth_preview(d).pixels);
}
