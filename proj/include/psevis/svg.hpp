#pragma once

// Static SVG rendering of an analysis grid: rows are timesteps (top to
// bottom), columns are state kinds in dependence order, then the model output.

#include <string>
#include <string_view>

#include <fmt/format.h>

#include "psevis/analysis.hpp"
#include "psevis/color.hpp"
#include "psevis/corpus.hpp"

namespace psevis {

struct SvgLayout {
  double cell_width = 84;
  double cell_height = 50;
  double swatch_height = 16;
  double bar_height = 8;
  double gap = 4;
  double label_width = 96;
  double header_height = 28;
  double legend_row = 18;
};

inline std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

namespace detail {

inline void render_cell(std::string& out, const PseEncoding& enc, double x, double y,
                        std::string_view swatch_class, const SvgLayout& L) {
  const double inner = L.cell_width - 2 * L.gap;
  out += fmt::format(
      "<rect class=\"{}\" x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" "
      "fill=\"{}\" stroke=\"#444444\" stroke-width=\"0.5\"><title>{} t={}: {} {:.1f}%</title></rect>\n",
      swatch_class, x + L.gap, y + L.gap, inner, L.swatch_height, to_hex(enc.swatch),
      xml_escape(enc.label()), enc.timestep, xml_escape(enc.dominant_tag), 100.0 * enc.dominance);
  double bar_y = y + L.gap + L.swatch_height + 2;
  for (const auto& bar : enc.bars) {
    out += fmt::format(
        "<rect class=\"bar\" x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.2f}\" height=\"{:.1f}\" "
        "fill=\"{}\"><title>{} {:.4f}</title></rect>\n",
        x + L.gap, bar_y, inner * bar.probability, L.bar_height - 1, to_hex(bar.color),
        xml_escape(bar.token), bar.probability);
    bar_y += L.bar_height;
  }
}

}  // namespace detail

/// One `swatch` rect per (timestep, kind) and one `output-swatch` per row.
inline std::string render_grid_svg(const AnalysisGrid& grid, const TagMap& tags,
                                   const SvgLayout& L = {}) {
  const std::size_t columns = grid.kinds.size() + 1;
  const double width = L.label_width + static_cast<double>(columns) * L.cell_width;
  const double grid_bottom = L.header_height + static_cast<double>(grid.rows()) * L.cell_height;
  const double height = grid_bottom + L.gap + static_cast<double>(tags.tag_colors().size()) * L.legend_row;

  std::string out;
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"10\">\n",
      width, height, width, height);
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#FFFFFF\"/>\n",
                     width, height);

  for (std::size_t c = 0; c < columns; ++c) {
    const std::string name = c < grid.kinds.size() ? grid.kinds[c].name() : std::string("y");
    out += fmt::format("<text class=\"header\" x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n",
                       L.label_width + (static_cast<double>(c) + 0.5) * L.cell_width,
                       L.header_height - 10, xml_escape(name));
  }

  for (std::size_t t = 0; t < grid.rows(); ++t) {
    const double y = L.header_height + static_cast<double>(t) * L.cell_height;
    out += fmt::format("<text class=\"token\" x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n",
                       L.label_width - L.gap, y + L.cell_height / 2, xml_escape(grid.tokens[t]));
    for (std::size_t c = 0; c < grid.kinds.size(); ++c) {
      detail::render_cell(out, grid.cells[t][c], L.label_width + static_cast<double>(c) * L.cell_width, y,
                          "swatch", L);
    }
    detail::render_cell(out, grid.outputs[t],
                        L.label_width + static_cast<double>(grid.kinds.size()) * L.cell_width, y,
                        "output-swatch", L);
  }

  double legend_y = grid_bottom + L.gap;
  for (const auto& tc : tags.tag_colors()) {
    out += fmt::format(
        "<rect class=\"legend\" x=\"{:.1f}\" y=\"{:.1f}\" width=\"12\" height=\"12\" fill=\"{}\"/>"
        "<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n",
        L.gap, legend_y, to_hex(tc.color), L.gap + 16, legend_y + 10, xml_escape(tc.tag));
    legend_y += L.legend_row;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace psevis
