#pragma once

#include "himoc/model.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace himoc::test {

inline Polygon rect(double x0, double y0, double x1, double y1) {
  Polygon p;
  bg::append(p.outer(), Point{x0, y0});
  bg::append(p.outer(), Point{x1, y0});
  bg::append(p.outer(), Point{x1, y1});
  bg::append(p.outer(), Point{x0, y1});
  bg::append(p.outer(), Point{x0, y0});
  return p;
}

inline Footprint house(Id id, double x, double y, double w, double h) { return {id, rect(x, y, x + w, y + h)}; }

inline Segment street(Id id, std::initializer_list<Point> pts, std::string kind = "residential") {
  Segment s;
  s.id = id;
  s.points.assign(pts.begin(), pts.end());
  s.kind = std::move(kind);
  return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("himoc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace himoc::test
