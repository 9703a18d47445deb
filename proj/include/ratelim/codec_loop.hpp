#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratelim/channel.hpp"
#include "ratelim/interval.hpp"
#include "ratelim/plant.hpp"

namespace ratelim {

/// The quantizer input left [-1/2, 1/2]: the scaling law failed to cover the output.
class SaturationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Encoder and decoder disagreed on (sigma, center).
class SynchronyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline constexpr double kSigmaMin = 1e-300;
inline constexpr double kConvergedSigma = 1e-150;
inline constexpr double kDivergedSigma = 1e150;
/// Slack allowed on |v| <= 1/2 for rounding in the loop arithmetic.
inline constexpr double kSaturationSlack = 1e-12;

/// Smallest sigma0 whose range [-sigma0/2, sigma0/2] covers every |y0| <= Y0.
inline double initial_sigma(double y0_bound) { return 2.0 * y0_bound; }

/// N-level uniform quantizer on [-1/2, 1/2]; R = log2 N bits per packet.
struct QuantizerSpec {
  int levels = 2;

  explicit QuantizerSpec(int n) : levels(n) {
    if (n < 1) throw std::invalid_argument("quantizer needs at least one level");
  }
  double rate_bits() const { return std::log2(static_cast<double>(levels)); }
};

/// Cell index of v: i with -1/2 + i/N <= v < -1/2 + (i+1)/N, the top cell closed.
/// Throws SaturationError when |v| > 1/2.
int quantize(int levels, double v);

/// Decoder interval: the symbol's cell of [center - sigma/2, center + sigma/2],
/// or the whole range when the packet was lost (nullopt).
Interval decode_cell(int levels, double sigma, double center, std::optional<int> symbol);

/// Prediction set for y[k+1]: the Minkowski sum of A_i * Y[k-i+1].
/// `cells[0]` is the most recent decoder interval Y[k].
Interval predict(const UncertainPlant& plant, std::span<const Interval> cells);

/// Certainty-equivalent control: u = -sum_i ai* * midpoint(Y[k-i+1]).
double control(const UncertainPlant& plant, std::span<const Interval> cells);

struct ScalingUpdate {
  double sigma;
  double center;
};

/// Smallest admissible range (the prediction measure, floored at sigma_min)
/// centered on the prediction translated by the applied input.
ScalingUpdate advance_scaling(const Interval& prediction, double u, double sigma_min = kSigmaMin);

/// Shared encoder/decoder state, driven only by the received history
/// (gamma_k s_k). Each side of the channel runs its own copy.
/// Nominal: u = -sum a_i* mid(cell_i), the certainty-equivalent law; the next
/// range is centered on the translated prediction set.
/// Recentered: u = -mid(prediction), which keeps every range centered at 0.
enum class ControlLaw { Nominal, Recentered };
std::string to_string(ControlLaw law);
ControlLaw parse_control_law(const std::string& text);

class CodecState {
 public:
  CodecState(const UncertainPlant& plant, int levels, double sigma0, double center0 = 0.0,
             ControlLaw law = ControlLaw::Nominal);

  double sigma() const { return sigma_; }
  double center() const { return center_; }
  /// Decoder intervals, most recent first; pre-initial entries are {0}.
  std::span<const Interval> cells() const { return cells_; }

  struct Step {
    Interval cell;
    double u;
    Interval prediction;
  };
  /// Consumes one received symbol (nullopt when lost), returns the decoder
  /// interval and control input for this step and advances to the next one.
  Step update(std::optional<int> received);

  bool same_scaling(const CodecState& other) const {
    return sigma_ == other.sigma_ && center_ == other.center_;
  }

 private:
  const UncertainPlant* plant_;
  int levels_;
  ControlLaw law_;
  double sigma_;
  double center_;
  std::vector<Interval> cells_;
};

enum class LoopStatus { Completed, Converged, Diverged };
std::string to_string(LoopStatus s);

struct TraceRow {
  std::int64_t k;
  double y;
  double sigma;
  double center;
  int gamma;  // received flag; for time-sharing, packets received in the cycle
  double u;
  std::int64_t symbol;  // encoder output
  Interval cell;
  double resolution;  // levels the decoder resolved y to (1 on loss)
};

struct SimTrace {
  std::vector<TraceRow> rows;
  LoopStatus status = LoopStatus::Completed;
  double max_abs_normalized = 0.0;  // largest |(y - c) / sigma| seen by the encoder

  void write_csv(std::ostream& os) const;
};

struct LoopOptions {
  /// Checks encoder/decoder scaling agreement each step.
  bool check_synchrony = true;
  ControlLaw control = ControlLaw::Nominal;
};

/// Runs the full synchronized loop: encode, channel, decode, control, plant step.
/// The initial range is [-Y0, Y0] (sigma0 = 2 Y0, center0 = 0). Throws
/// SaturationError on an encoder overflow.
SimTrace run_closed_loop(const UncertainPlant& plant, const QuantizerSpec& quantizer,
                         const LossChannel& channel, ParamRealizer& realizer, int steps,
                         double y0, const LoopOptions& options = {});

}  // namespace ratelim
