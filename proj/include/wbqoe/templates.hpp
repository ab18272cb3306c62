#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wbqoe/error.hpp"
#include "wbqoe/types.hpp"

namespace wbqoe {

inline constexpr std::size_t kTemplateCount = 6;

struct Template {
  std::string name;
  std::vector<std::vector<Point>> slots;  // each slot is one polyline to draw
  friend bool operator==(const Template&, const Template&) = default;
};

struct TemplateSet {
  std::vector<Template> templates;

  /// Slots in template order (template-major).
  std::vector<SlotRef> slot_refs() const {
    std::vector<SlotRef> out;
    for (std::size_t t = 0; t < templates.size(); ++t)
      for (std::size_t s = 0; s < templates[t].slots.size(); ++s)
        out.push_back({static_cast<int>(t), static_cast<int>(s)});
    return out;
  }

  std::size_t slot_count() const {
    std::size_t n = 0;
    for (const auto& t : templates) n += t.slots.size();
    return n;
  }

  const std::vector<Point>& polyline(SlotRef r) const {
    return templates.at(static_cast<std::size_t>(r.template_index)).slots.at(static_cast<std::size_t>(r.slot_index));
  }

  friend bool operator==(const TemplateSet&, const TemplateSet&) = default;
};

inline void validate(const TemplateSet& set) {
  if (set.templates.size() != kTemplateCount)
    throw Error(Errc::InvalidTemplateSet, "expected 6 templates, got " + std::to_string(set.templates.size()));
  for (const auto& t : set.templates) {
    if (t.slots.empty()) throw Error(Errc::InvalidTemplateSet, "template '" + t.name + "' has no slots");
    for (const auto& poly : t.slots) {
      if (poly.size() < 2) throw Error(Errc::InvalidTemplateSet, "slot polyline needs at least 2 points");
      for (const auto& p : poly)
        if (!in_unit_square(p)) throw Error(Errc::InvalidTemplateSet, "template point outside the unit square");
    }
  }
  if (set.slot_count() < 2) throw Error(Errc::InvalidTemplateSet, "need at least 2 slots");
}

namespace detail {

// Templates are laid out on a 3 x 2 grid of board cells.
inline Point cell_point(std::size_t index, double lx, double ly) {
  const double col = static_cast<double>(index % 3);
  const double row = static_cast<double>(index / 3);
  return {(col + lx) / 3.0, (row + ly) / 2.0};
}

inline Template make_template(std::size_t index, std::string name,
                              std::vector<std::vector<std::pair<double, double>>> local) {
  Template t{std::move(name), {}};
  for (const auto& poly : local) {
    std::vector<Point> pts;
    for (auto [x, y] : poly) pts.push_back(cell_point(index, x, y));
    t.slots.push_back(std::move(pts));
  }
  return t;
}

}  // namespace detail

/// The shipped task: 6 templates x 4 slots of 2-6 points each.
inline TemplateSet default_templates() {
  using detail::make_template;
  TemplateSet set;
  set.templates.push_back(make_template(0, "house",
                                        {{{0.2, 0.8}, {0.8, 0.8}},
                                         {{0.2, 0.8}, {0.2, 0.45}},
                                         {{0.8, 0.8}, {0.8, 0.45}},
                                         {{0.15, 0.5}, {0.5, 0.15}, {0.85, 0.5}}}));
  set.templates.push_back(make_template(1, "arrow",
                                        {{{0.1, 0.5}, {0.9, 0.5}},
                                         {{0.7, 0.3}, {0.9, 0.5}},
                                         {{0.7, 0.7}, {0.9, 0.5}},
                                         {{0.1, 0.35}, {0.2, 0.5}, {0.1, 0.65}}}));
  set.templates.push_back(make_template(2, "zigzag",
                                        {{{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.2}},
                                         {{0.5, 0.2}, {0.7, 0.4}, {0.9, 0.2}},
                                         {{0.1, 0.6}, {0.25, 0.8}, {0.4, 0.6}, {0.55, 0.8}},
                                         {{0.55, 0.8}, {0.7, 0.6}, {0.8, 0.7}, {0.85, 0.8}, {0.9, 0.6}}}));
  set.templates.push_back(make_template(3, "boat",
                                        {{{0.1, 0.6}, {0.3, 0.8}, {0.7, 0.8}, {0.9, 0.6}},
                                         {{0.5, 0.6}, {0.5, 0.1}},
                                         {{0.5, 0.15}, {0.8, 0.5}, {0.5, 0.5}},
                                         {{0.1, 0.6}, {0.9, 0.6}}}));
  set.templates.push_back(make_template(4, "envelope",
                                        {{{0.1, 0.25}, {0.9, 0.25}, {0.9, 0.8}},
                                         {{0.9, 0.8}, {0.1, 0.8}, {0.1, 0.25}},
                                         {{0.1, 0.25}, {0.5, 0.55}, {0.9, 0.25}},
                                         {{0.1, 0.8}, {0.4, 0.5}}}));
  set.templates.push_back(make_template(5, "wave",
                                        {{{0.1, 0.3}, {0.2, 0.2}, {0.3, 0.3}, {0.4, 0.2}, {0.5, 0.3}, {0.6, 0.2}},
                                         {{0.1, 0.5}, {0.3, 0.4}, {0.5, 0.5}, {0.7, 0.4}, {0.9, 0.5}},
                                         {{0.1, 0.7}, {0.5, 0.6}, {0.9, 0.7}},
                                         {{0.1, 0.9}, {0.9, 0.9}}}));
  return set;
}

/// A task of `total_slots` straight-line slots spread over the 6 templates
/// (earlier templates take the remainder). Needs total_slots >= 6.
inline TemplateSet uniform_templates(std::size_t total_slots) {
  if (total_slots < kTemplateCount)
    throw Error(Errc::InvalidTemplateSet, "a uniform task needs at least one slot per template");
  TemplateSet set;
  for (std::size_t t = 0; t < kTemplateCount; ++t) {
    const std::size_t n = total_slots / kTemplateCount + (t < total_slots % kTemplateCount ? 1 : 0);
    std::vector<std::vector<std::pair<double, double>>> local;
    for (std::size_t s = 0; s < n; ++s) {
      const double y = (static_cast<double>(s) + 0.5) / static_cast<double>(n);
      local.push_back({{0.1, y}, {0.9, y}});
    }
    set.templates.push_back(detail::make_template(t, "lines" + std::to_string(t), std::move(local)));
  }
  return set;
}

inline nlohmann::json to_json(const TemplateSet& set) {
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& t : set.templates) {
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& poly : t.slots) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : poly) pts.push_back({p.x, p.y});
      slots.push_back(std::move(pts));
    }
    ts.push_back({{"name", t.name}, {"slots", std::move(slots)}});
  }
  return {{"templates", std::move(ts)}};
}

inline TemplateSet template_set_from_json(const nlohmann::json& j) {
  TemplateSet set;
  try {
    for (const auto& t : j.at("templates")) {
      Template tpl;
      tpl.name = t.at("name").get<std::string>();
      for (const auto& poly : t.at("slots")) {
        std::vector<Point> pts;
        for (const auto& p : poly) {
          if (!p.is_array() || p.size() != 2) throw Error(Errc::InvalidTemplateSet, "point is not [x, y]");
          pts.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        tpl.slots.push_back(std::move(pts));
      }
      set.templates.push_back(std::move(tpl));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidTemplateSet, e.what());
  }
  validate(set);
  return set;
}

inline TemplateSet load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidTemplateSet, "cannot open " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::InvalidTemplateSet, path + " is not valid JSON");
  return template_set_from_json(j);
}

}  // namespace wbqoe
