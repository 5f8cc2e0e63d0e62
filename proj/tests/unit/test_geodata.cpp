#include "doctest.h"

#include "lsm/error.hpp"
#include "lsm/log.hpp"
#include "lsm/rng.hpp"
#include "lsm/stack.hpp"

#include <cmath>
#include <sstream>

using namespace lsm;

namespace {

RasterGrid parse(const std::string& text) {
    std::istringstream in(text);
    return parse_ascii_grid(in, "test.asc");
}

RasterGrid grid2x2(double a, double b, double c, double d, double xll = 0.0) {
    RasterGrid g;
    g.rows = 2;
    g.cols = 2;
    g.cellsize = 1.0;
    g.xll = xll;
    g.values.resize(2, 2);
    g.values << a, b, c, d;
    return g;
}

}  // namespace

TEST_CASE("ascii grid parses header and values") {
    const RasterGrid g = parse("ncols 2\nnrows 2\nxllcorner 10.5\nyllcorner -3\ncellsize 30\nNODATA_value -9999\n1 2\n3 4\n");
    CHECK(g.rows == 2);
    CHECK(g.cols == 2);
    CHECK(g.xll == 10.5);
    CHECK(g.yll == -3.0);
    CHECK(g.cellsize == 30.0);
    CHECK(g.nodata == -9999.0);
    CHECK(g.at(0) == 1.0);
    CHECK(g.at(1) == 2.0);
    CHECK(g.at(2) == 3.0);
    CHECK(g.at(3) == 4.0);
}

TEST_CASE("ascii grid errors carry the count and line number") {
    try {
        parse("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3\n");
        FAIL("expected a parse error");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("expected 4 values, got 3") != std::string::npos);
        CHECK(msg.find("test.asc:8") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 x\n"), DataError);
    CHECK_THROWS_AS(parse("ncols 2\nnrows 2\nxllcorner 0\ncellsize 1\n1 2\n3 4\n"), DataError);
    CHECK_THROWS_AS(parse("ncols 2\nbogus 2\n"), DataError);
    CHECK_THROWS_AS(parse("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0\n1 2\n3 4\n"), DataError);
    CHECK_THROWS_AS(parse("ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n"), DataError);
}

TEST_CASE("ascii grid round trip is bit exact") {
    Rng rng(5);
    RasterGrid g;
    g.rows = 7;
    g.cols = 5;
    g.cellsize = 12.345678901234567;
    g.xll = 412345.1;
    g.yll = -0.1;
    g.nodata = -9999.0;
    g.values.resize(7, 5);
    for (std::size_t i = 0; i < g.cell_count(); ++i) g.at(i) = (rng.uniform() - 0.5) * std::pow(10.0, rng.below(12)) ;
    g.at(3) = g.nodata;
    std::ostringstream first;
    write_ascii_grid(first, g);
    const RasterGrid back = parse(first.str());
    CHECK(back.values == g.values);
    CHECK(back.cellsize == g.cellsize);
    CHECK(back.xll == g.xll);
    CHECK(back.yll == g.yll);
    std::ostringstream second;
    write_ascii_grid(second, back);
    CHECK(first.str() == second.str());

    const RasterGrid centered = parse("ncols 1\nnrows 1\nxllcenter 0.5\nyllcenter 0.5\ncellsize 1\n7\n");
    std::ostringstream out;
    write_ascii_grid(out, centered);
    CHECK(out.str().find("xllcenter 0.5") != std::string::npos);
}

TEST_CASE("build_stack statistics and validation") {
    const RasterStack s = RasterStack::build({{"a", grid2x2(0, 1, 2, 3)}});
    CHECK(s.stats()[0].min == 0.0);
    CHECK(s.stats()[0].max == 3.0);

    CHECK_THROWS_AS(RasterStack::build({{"a", grid2x2(0, 1, 2, 3)}, {"b", grid2x2(0, 1, 2, 3, 5.0)}}), DataError);
    try {
        RasterStack::build({{"a", grid2x2(0, 1, 2, 3)}, {"shifted", grid2x2(0, 1, 2, 3, 5.0)}});
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("shifted") != std::string::npos);
    }
    try {
        RasterStack::build({{"flat", grid2x2(2, 2, 2, 2)}});
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("degenerate band") != std::string::npos);
    }

    RasterGrid with_nodata = grid2x2(-9999, 5, 1, 3);
    const RasterStack n = RasterStack::build({{"n", with_nodata}});
    CHECK(n.stats()[0].min == 1.0);
    CHECK(n.stats()[0].max == 5.0);
}

TEST_CASE("normalize maps band extremes to 0 and 1") {
    const RasterStack s = RasterStack::build({{"a", grid2x2(0, 1, 2, 4)}, {"b", grid2x2(-1, 0, 1, 3)}});
    CHECK(normalize(s, Vector::Map(std::vector<double>{0, -1}.data(), 2)) == Vector::Zero(2));
    CHECK(normalize(s, Vector::Map(std::vector<double>{4, 3}.data(), 2)) == Vector::Ones(2));
    CHECK(normalize(s, Vector::Map(std::vector<double>{1, 1}.data(), 2))(0) == 0.25);
    CHECK(normalize(s, Vector::Map(std::vector<double>{9, -7}.data(), 2)) == Vector::Map(std::vector<double>{1, 0}.data(), 2));
}

TEST_CASE("featurize_point uses nearest-cell lookup") {
    // Rows: top row (north) is 0 1, bottom row is 2 3; cellsize 1, origin (0, 0).
    const RasterStack s = RasterStack::build({{"a", grid2x2(0, 1, 2, 3)}});
    const FeatureVector center = featurize_point(s, {0.5, 1.5, 1});
    CHECK(center.pixel_index == 0);
    CHECK(center.values(0) == 0.0);
    CHECK(center.label == 1);
    CHECK(featurize_point(s, {1.5, 0.5, std::nullopt}).pixel_index == 3);
    // Interior corner: floor rule sends ties to the higher column and higher (northern) y index.
    CHECK(featurize_point(s, {1.0, 1.0, 0}).pixel_index == 1);
    // Far edges belong to the last cell.
    CHECK(featurize_point(s, {2.0, 2.0, 0}).pixel_index == 1);
    CHECK(featurize_point(s, {0.0, 0.0, 0}).pixel_index == 2);
    CHECK_THROWS_AS(featurize_point(s, {2.5, 0.5, 0}), DataError);
    CHECK_THROWS_AS(featurize_point(s, {0.5, -0.1, 0}), DataError);

    const RasterStack nd = RasterStack::build({{"a", grid2x2(-9999, 1, 2, 3)}});
    CHECK_THROWS_AS(featurize_point(nd, {0.5, 1.5, 1}), DataError);
}

TEST_CASE("featurize_all_cells skips nodata") {
    set_quiet(true);
    const RasterStack s = RasterStack::build({{"a", grid2x2(0, 1, 2, 3)}});
    const auto all = featurize_all_cells(s);
    REQUIRE(all.vectors.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(all.vectors[i].pixel_index == i);

    const RasterStack nd = RasterStack::build({{"a", grid2x2(0, 1, 2, 3)}, {"b", grid2x2(1, 2, -9999, 4)}});
    const auto some = featurize_all_cells(nd);
    CHECK(some.vectors.size() == 3);
    CHECK(some.skip_mask == std::vector<bool>{false, false, true, false});
    for (const auto& v : some.vectors) {
        CHECK(v.values.minCoeff() >= 0.0);
        CHECK(v.values.maxCoeff() <= 1.0);
    }
}

TEST_CASE("samples csv") {
    std::istringstream in("x,y,label\n1.5,2.5,1\n3,4,0\n5,6,\n");
    const auto pts = parse_samples_csv(in);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].label == 1);
    CHECK(pts[1].label == 0);
    CHECK(!pts[2].label);
    std::ostringstream out;
    write_samples_csv(out, pts);
    CHECK(out.str() == "x,y,label\n1.5,2.5,1\n3,4,0\n5,6,\n");

    std::istringstream bad_header("a,b,c\n");
    CHECK_THROWS_AS(parse_samples_csv(bad_header), DataError);
    std::istringstream bad_label("x,y,label\n1,2,7\n");
    CHECK_THROWS_AS(parse_samples_csv(bad_label), DataError);
}
