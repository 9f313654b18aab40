#pragma once

#include <string>
#include <vector>

#include "mtnetopt/experiment.hpp"

namespace mtnetopt {

/// Locale-independent shortest round-trip formatting ('.' decimal point).
std::string format_double(double v);

void write_frame_csv(const std::string& path,
                     const std::vector<FrameMetrics>& frames);
std::vector<FrameMetrics> read_frame_csv(const std::string& path);

void write_summary_json(const std::string& path, const Scenario& scenario,
                        const ScenarioResults& results);

struct ChannelDumpRow {
  double t_sec = 0.0;
  int link_id = 0;
  double re_hs = 0.0;
  double im_hs = 0.0;
  double h_l = 0.0;
};
void write_channel_csv(const std::string& path,
                       const std::vector<ChannelDumpRow>& rows);

/// Minimal static SVG line plot (one polyline per series).
class SvgLinePlot {
 public:
  SvgLinePlot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void add_series(const std::string& name, const std::vector<double>& xs,
                  const std::vector<double>& ys);
  std::string render() const;
  void write(const std::string& path) const;

 private:
  struct Series {
    std::string name;
    std::vector<double> xs, ys;
  };
  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
};

}  // namespace mtnetopt
