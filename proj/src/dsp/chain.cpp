#include "mrcp/dsp.hpp"

namespace mrcp::dsp {

Recording preprocess_chain(const Recording& r, const PreprocessConfig& cfg) {
  require_valid(r);
  const auto broad = design_bandpass(FilterFamily::chebyshev1, cfg.broad_order, cfg.broad_low_hz, cfg.broad_high_hz,
                                     r.fs, cfg.cheby_ripple_db);
  const auto mrcp_band =
      design_bandpass(FilterFamily::butterworth, cfg.mrcp_order, cfg.mrcp_low_hz, cfg.mrcp_high_hz, r.fs);

  Recording out = filtfilt(broad, r);
  if (cfg.notch) out = filtfilt(design_notch(cfg.notch_hz, r.fs, cfg.notch_q), out);
  out = filtfilt(mrcp_band, out);
  if (cfg.car) out = car(out);
  if (cfg.target_fs < out.fs) out = resample(out, cfg.target_fs);
  return out;
}

}  // namespace mrcp::dsp
