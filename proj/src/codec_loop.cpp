#include "ratelim/codec_loop.hpp"

#include <algorithm>
#include <sstream>

namespace ratelim {

int quantize(int levels, double v) {
  if (levels < 1) throw std::invalid_argument("quantize: levels must be at least 1");
  if (!(std::abs(v) <= 0.5)) {
    std::ostringstream msg;
    msg << "quantizer saturated: input " << v << " outside [-1/2, 1/2]";
    throw SaturationError(msg.str());
  }
  const double n = levels;
  int i = static_cast<int>(std::floor((v + 0.5) * n));
  i = std::clamp(i, 0, levels - 1);
  // Settle onto the displayed cell boundaries -1/2 + i/N.
  while (i > 0 && v < -0.5 + i / n) --i;
  while (i < levels - 1 && v >= -0.5 + (i + 1) / n) ++i;
  return i;
}

Interval decode_cell(int levels, double sigma, double center, std::optional<int> symbol) {
  if (!(sigma > 0.0)) throw std::invalid_argument("decode_cell: sigma must be positive");
  if (!symbol) return Interval(center - 0.5 * sigma, center + 0.5 * sigma);
  const int i = *symbol;
  if (i < 0 || i >= levels) throw std::invalid_argument("decode_cell: symbol outside alphabet");
  const double n = levels;
  const double lo = center + sigma * (-0.5 + i / n);
  const double hi = i == levels - 1 ? center + 0.5 * sigma : center + sigma * (-0.5 + (i + 1) / n);
  return Interval(lo, std::max(lo, hi));
}

Interval predict(const UncertainPlant& plant, std::span<const Interval> cells) {
  const std::size_t n = plant.order();
  if (cells.size() < n) throw std::invalid_argument("predict: fewer cells than plant order");
  Interval sum = Interval::point(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sum = minkowski_sum(sum, scale_product(plant.coefficient_box(i), cells[i]));
  }
  return sum;
}

double control(const UncertainPlant& plant, std::span<const Interval> cells) {
  const std::size_t n = plant.order();
  if (cells.size() < n) throw std::invalid_argument("control: fewer cells than plant order");
  double u = 0.0;
  for (std::size_t i = 0; i < n; ++i) u -= plant.nominal(i) * cells[i].midpoint();
  return u;
}

ScalingUpdate advance_scaling(const Interval& prediction, double u, double sigma_min) {
  return {std::max(prediction.measure(), sigma_min), prediction.midpoint() + u};
}

CodecState::CodecState(const UncertainPlant& plant, int levels, double sigma0, double center0,
                       ControlLaw law)
    : plant_(&plant),
      levels_(levels),
      law_(law),
      sigma_(sigma0),
      center_(center0),
      cells_(plant.order(), Interval::point(0.0)) {
  if (levels < 1) throw std::invalid_argument("codec: levels must be at least 1");
  if (!(sigma0 > 0.0)) throw std::invalid_argument("codec: sigma0 must be positive");
}

CodecState::Step CodecState::update(std::optional<int> received) {
  const Interval cell = decode_cell(levels_, sigma_, center_, received);
  std::rotate(cells_.rbegin(), cells_.rbegin() + 1, cells_.rend());
  cells_.front() = cell;
  const Interval prediction = predict(*plant_, cells_);
  const double u = law_ == ControlLaw::Nominal ? control(*plant_, cells_) : -prediction.midpoint();
  const ScalingUpdate next = advance_scaling(prediction, u);
  sigma_ = next.sigma;
  center_ = next.center;
  return {cell, u, prediction};
}

std::string to_string(ControlLaw law) {
  return law == ControlLaw::Nominal ? "nominal" : "recentered";
}

ControlLaw parse_control_law(const std::string& text) {
  if (text == "nominal") return ControlLaw::Nominal;
  if (text == "recentered") return ControlLaw::Recentered;
  throw std::invalid_argument("unknown control law '" + text + "' (nominal|recentered)");
}

std::string to_string(LoopStatus s) {
  switch (s) {
    case LoopStatus::Completed:
      return "completed";
    case LoopStatus::Converged:
      return "converged";
    case LoopStatus::Diverged:
      return "diverged";
  }
  return "unknown";
}

void SimTrace::write_csv(std::ostream& os) const {
  const auto old_precision = os.precision(17);
  os << "k,y,sigma,gamma,u,symbol,cell_lo,cell_hi\n";
  for (const auto& r : rows) {
    os << r.k << ',' << r.y << ',' << r.sigma << ',' << r.gamma << ',' << r.u << ',' << r.symbol
       << ',' << r.cell.lo() << ',' << r.cell.hi() << '\n';
  }
  os.precision(old_precision);
}

SimTrace run_closed_loop(const UncertainPlant& plant, const QuantizerSpec& quantizer,
                         const LossChannel& channel, ParamRealizer& realizer, int steps,
                         double y0, const LoopOptions& options) {
  if (steps < 0) throw std::invalid_argument("steps must be nonnegative");
  if (!(std::abs(y0) <= plant.y0_bound())) {
    throw std::invalid_argument("initial output exceeds the bound Y0");
  }
  const int levels = quantizer.levels;
  const double sigma0 = initial_sigma(plant.y0_bound());
  CodecState encoder(plant, levels, sigma0, 0.0, options.control);
  CodecState decoder(plant, levels, sigma0, 0.0, options.control);

  std::vector<double> history(plant.order(), 0.0);
  history.front() = y0;

  SimTrace trace;
  trace.rows.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double sigma = encoder.sigma();
    const double center = encoder.center();
    if (sigma < kConvergedSigma) {
      trace.status = LoopStatus::Converged;
      break;
    }
    if (sigma > kDivergedSigma || !std::isfinite(history.front())) {
      trace.status = LoopStatus::Diverged;
      break;
    }

    const double y = history.front();
    const double v = (y - center) / sigma;
    trace.max_abs_normalized = std::max(trace.max_abs_normalized, std::abs(v));
    if (std::abs(v) > 0.5 + kSaturationSlack) {
      std::ostringstream msg;
      msg << "quantizer saturated at k=" << k << ": y=" << y << " center=" << center
          << " sigma=" << sigma << " (normalized " << v << ")";
      throw SaturationError(msg.str());
    }
    const int symbol = quantize(levels, std::clamp(v, -0.5, 0.5));

    const int gamma = channel.draw(static_cast<std::uint64_t>(k));
    const std::optional<int> received = gamma == 1 ? std::optional<int>(symbol) : std::nullopt;

    const CodecState::Step dec = decoder.update(received);
    encoder.update(received);
    if (options.check_synchrony && !encoder.same_scaling(decoder)) {
      throw SynchronyError("encoder and decoder scaling diverged at k=" + std::to_string(k));
    }

    const double u = dec.u;
    const auto next_output = [&](std::span<const double> params) {
      double s = u;
      for (std::size_t i = 0; i < params.size(); ++i) s += params[i] * history[i];
      return s;
    };
    const std::vector<double> params = realizer.next(next_output);
    const double y_next = step(plant, history, u, params);

    trace.rows.push_back({k, y, sigma, center, gamma, u, symbol, dec.cell,
                          gamma == 1 ? static_cast<double>(levels) : 1.0});

    std::rotate(history.rbegin(), history.rbegin() + 1, history.rend());
    history.front() = y_next;
  }
  return trace;
}

}  // namespace ratelim
