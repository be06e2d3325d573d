#include "percloss/percloss.h"

#include <cmath>
#include <cstdlib>
#include <new>
#include <string>
#include <vector>

#include "percloss/errors.hpp"
#include "percloss/experiment.hpp"
#include "percloss/multitask.hpp"
#include "percloss/pesq.hpp"
#include "percloss/sdr.hpp"
#include "percloss/signal.hpp"
#include "percloss/stoi.hpp"

struct pl_context {
  percloss::PesqTables tables;
  std::string last_error;
  std::vector<std::string> warnings;
};

struct pl_signal {
  std::vector<double> samples;
};

struct pl_experiment {
  std::string csv;
  std::string json;
  bool trends_passed = false;
};

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kDefaultSnrs[] = {-10.0, -5.0, 0.0, 5.0, 10.0, 15.0};

template <typename F>
pl_status guarded(pl_context* ctx, F&& body) {
  if (ctx) ctx->last_error.clear();
  auto fail = [&](pl_status s, const char* what) {
    if (ctx) ctx->last_error = what;
    return s;
  };
  try {
    return body();
  } catch (const percloss::InvalidArgument& e) {
    return fail(PL_ERR_INVALID_ARGUMENT, e.what());
  } catch (const percloss::FormatError& e) {
    return fail(PL_ERR_FORMAT, e.what());
  } catch (const percloss::IoError& e) {
    return fail(PL_ERR_IO, e.what());
  } catch (const percloss::NumericError& e) {
    return fail(PL_ERR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(PL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PL_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw percloss::InvalidArgument(what);
}

percloss::LossKind to_kind(pl_loss loss) {
  switch (loss) {
    case PL_LOSS_SDR: return percloss::LossKind::Sdr;
    case PL_LOSS_PESQ: return percloss::LossKind::Pesq;
    case PL_LOSS_STOI: return percloss::LossKind::Stoi;
    case PL_LOSS_SDR_PESQ: return percloss::LossKind::SdrPesq;
    case PL_LOSS_SDR_STOI: return percloss::LossKind::SdrStoi;
    case PL_LOSS_SDR_PESQ_STOI: return percloss::LossKind::SdrPesqStoi;
  }
  throw percloss::InvalidArgument("unknown loss");
}

percloss::CombinationWeights to_weights(pl_weights w) { return {w.alpha, w.beta}; }

void append(pl_context* ctx, const percloss::Diagnostics& d) {
  for (const auto& w : d.warnings) ctx->warnings.push_back(w);
}

}  // namespace

extern "C" {

const char* pl_version(void) { return kVersion; }

const char* pl_status_string(pl_status status) {
  switch (status) {
    case PL_OK: return "ok";
    case PL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PL_ERR_FORMAT: return "format error";
    case PL_ERR_IO: return "i/o error";
    case PL_ERR_NUMERIC: return "numeric error";
    case PL_ERR_CHECK_FAILED: return "check failed";
    case PL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

pl_status pl_context_create(const char* tables_path, pl_context** out) {
  if (!out) return PL_ERR_INVALID_ARGUMENT;
  *out = nullptr;
  pl_context* ctx = nullptr;
  try {
    ctx = new pl_context;
  } catch (const std::bad_alloc&) {
    return PL_ERR_INTERNAL;
  }
  const pl_status s = guarded(ctx, [&] {
    const char* path = tables_path ? tables_path : std::getenv("PERCLOSS_PESQ_TABLES");
    if (path && *path)
      ctx->tables = percloss::PesqTables::load(path);
    else
      ctx->tables = percloss::PesqTables::builtin();
    return PL_OK;
  });
  if (s != PL_OK) {
    // Keep the context so the caller can read the error, but make it
    // usable with the built-in tables.
    ctx->tables = percloss::PesqTables::builtin();
  }
  *out = ctx;
  return s;
}

void pl_context_destroy(pl_context* ctx) { delete ctx; }

const char* pl_last_error(const pl_context* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

const char* pl_tables_revision(const pl_context* ctx) {
  return ctx ? ctx->tables.revision.c_str() : "";
}

size_t pl_warning_count(const pl_context* ctx) { return ctx ? ctx->warnings.size() : 0; }

const char* pl_warning(const pl_context* ctx, size_t index) {
  if (!ctx || index >= ctx->warnings.size()) return nullptr;
  return ctx->warnings[index].c_str();
}

void pl_clear_warnings(pl_context* ctx) {
  if (ctx) ctx->warnings.clear();
}

pl_status pl_signal_create(pl_context* ctx, const double* samples, size_t length,
                           pl_signal** out) {
  return guarded(ctx, [&] {
    require(out != nullptr, "null output handle");
    require(samples != nullptr || length == 0, "null sample buffer");
    *out = nullptr;
    for (size_t i = 0; i < length; ++i)
      if (!std::isfinite(samples[i])) throw percloss::InvalidArgument("non-finite sample");
    auto sig = new pl_signal;
    sig->samples.assign(samples, samples + length);
    *out = sig;
    return PL_OK;
  });
}

pl_status pl_signal_load_wav(pl_context* ctx, const char* path, pl_signal** out) {
  return guarded(ctx, [&] {
    require(ctx && path && out, "null argument");
    *out = nullptr;
    percloss::Diagnostics diag;
    percloss::Signal s = percloss::load_wav(path, &diag);
    append(ctx, diag);
    auto sig = new pl_signal;
    sig->samples = std::move(s.samples);
    *out = sig;
    return PL_OK;
  });
}

pl_status pl_signal_save_wav(pl_context* ctx, const pl_signal* signal, const char* path) {
  return guarded(ctx, [&] {
    require(ctx && signal && path, "null argument");
    percloss::Diagnostics diag;
    percloss::Signal s{signal->samples, percloss::kSampleRate};
    percloss::save_wav_float(path, s, &diag);
    append(ctx, diag);
    return PL_OK;
  });
}

size_t pl_signal_length(const pl_signal* signal) {
  return signal ? signal->samples.size() : 0;
}

const double* pl_signal_data(const pl_signal* signal) {
  return signal ? signal->samples.data() : nullptr;
}

pl_status pl_signal_truncate(pl_context* ctx, pl_signal* signal, size_t length) {
  return guarded(ctx, [&] {
    require(signal != nullptr, "null signal");
    require(length <= signal->samples.size(), "truncation longer than the signal");
    signal->samples.resize(length);
    return PL_OK;
  });
}

void pl_signal_destroy(pl_signal* signal) { delete signal; }

pl_status pl_mix_at_snr(pl_context* ctx, const pl_signal* clean, const pl_signal* noise,
                        double snr_db, pl_signal** out, double* noise_gain) {
  return guarded(ctx, [&] {
    require(clean && noise && out, "null argument");
    *out = nullptr;
    percloss::Mixture mix = percloss::mix_at_snr(clean->samples, noise->samples, snr_db);
    auto sig = new pl_signal;
    sig->samples = std::move(mix.noisy);
    *out = sig;
    if (noise_gain) *noise_gain = mix.noise_gain;
    return PL_OK;
  });
}

pl_status pl_score(pl_context* ctx, const pl_signal* clean, const pl_signal* estimate,
                   pl_weights weights, pl_score_report* out) {
  return guarded(ctx, [&] {
    require(ctx && clean && estimate && out, "null argument");
    const auto w = to_weights(weights);
    percloss::validate(w);
    const auto sdr = percloss::si_sdr(clean->samples, estimate->samples);
    const auto pesq = percloss::loss_pesq(clean->samples, estimate->samples, ctx->tables);
    const auto stoi = percloss::loss_stoi(clean->samples, estimate->samples);
    pl_score_report r{};
    r.si_sdr_db = sdr.db;
    r.si_sdr_clamped = sdr.clamped ? 1 : 0;
    r.pesq_loss = pesq.value;
    r.d_sym = pesq.d_sym;
    r.d_asym = pesq.d_asym;
    r.stoi_loss = stoi.value;
    r.sdr_pesq = sdr.db + w.alpha * pesq.value;
    r.sdr_stoi = sdr.db + w.beta * stoi.value;
    r.sdr_pesq_stoi = sdr.db + w.alpha * pesq.value + w.beta * stoi.value;
    *out = r;
    return PL_OK;
  });
}

pl_status pl_loss_from_name(const char* name, pl_loss* out) {
  if (!name || !out) return PL_ERR_INVALID_ARGUMENT;
  const auto kind = percloss::parse_loss_name(name);
  if (!kind) return PL_ERR_INVALID_ARGUMENT;
  *out = static_cast<pl_loss>(static_cast<int>(*kind));
  return PL_OK;
}

const char* pl_loss_name(pl_loss loss) {
  try {
    return percloss::loss_name(to_kind(loss)).data();
  } catch (...) {
    return nullptr;
  }
}

pl_status pl_gradient(pl_context* ctx, pl_loss loss, pl_weights weights,
                      const pl_signal* clean, const pl_signal* estimate, double* value,
                      double* gradient, size_t length) {
  return guarded(ctx, [&] {
    require(ctx && clean && estimate && value, "null argument");
    require(!gradient || length == estimate->samples.size(),
            "gradient buffer length mismatch");
    const auto objective = percloss::make_objective(to_kind(loss), clean->samples,
                                                    to_weights(weights), ctx->tables);
    if (!gradient) {
      require(objective->input_length() == estimate->samples.size(),
              "clean and estimate lengths differ");
      *value = objective->evaluate(estimate->samples, false).value;
      percloss::require_finite(*value, "objective");
      return PL_OK;
    }
    const percloss::Gradient g = percloss::gradient(*objective, estimate->samples);
    *value = g.value;
    std::copy(g.d_input.begin(), g.d_input.end(), gradient);
    return PL_OK;
  });
}

pl_status pl_gradcheck(pl_context* ctx, pl_loss loss, pl_weights weights, uint64_t seed,
                       size_t coordinates, double step, pl_gradcheck_report* out) {
  return guarded(ctx, [&] {
    require(ctx && out, "null argument");
    const auto r = percloss::run_gradcheck(to_kind(loss), to_weights(weights), seed,
                                           coordinates, step, ctx->tables);
    *out = {r.max_rel_error, r.worst_index, r.analytic, r.numeric, r.coordinates};
    return PL_OK;
  });
}

void pl_experiment_config_default(pl_experiment_config* config) {
  if (!config) return;
  const percloss::ExperimentConfig d;
  config->snrs = kDefaultSnrs;
  config->snr_count = sizeof kDefaultSnrs / sizeof kDefaultSnrs[0];
  config->weights = {d.weights.alpha, d.weights.beta};
  config->steps = d.steps;
  config->step_size = d.step_size;
  config->seed = d.seed;
  config->noise = "white";
  config->duration_s = d.duration_s;
}

pl_status pl_experiment_run(pl_context* ctx, const pl_experiment_config* config,
                            pl_experiment** out) {
  return guarded(ctx, [&] {
    require(ctx && config && out, "null argument");
    require(config->snrs != nullptr || config->snr_count == 0, "null SNR list");
    *out = nullptr;
    percloss::ExperimentConfig c;
    c.snrs.assign(config->snrs, config->snrs + config->snr_count);
    c.weights = to_weights(config->weights);
    c.steps = config->steps;
    c.step_size = config->step_size;
    c.seed = config->seed;
    if (config->noise) {
      const auto n = percloss::parse_noise_name(config->noise);
      if (!n) throw percloss::InvalidArgument(std::string("unknown noise type '") +
                                              config->noise + "'");
      c.noise = *n;
    }
    c.duration_s = config->duration_s;
    const auto result = percloss::run_experiment(c, ctx->tables);
    auto e = new pl_experiment;
    e->csv = percloss::to_csv(result);
    e->json = percloss::to_json(result, c);
    e->trends_passed = true;
    for (const auto& t : result.trends) e->trends_passed = e->trends_passed && t.passed;
    *out = e;
    return PL_OK;
  });
}

const char* pl_experiment_csv(const pl_experiment* experiment) {
  return experiment ? experiment->csv.c_str() : nullptr;
}

const char* pl_experiment_json(const pl_experiment* experiment) {
  return experiment ? experiment->json.c_str() : nullptr;
}

int pl_experiment_trends_passed(const pl_experiment* experiment) {
  return experiment && experiment->trends_passed ? 1 : 0;
}

void pl_experiment_destroy(pl_experiment* experiment) { delete experiment; }

}  // extern "C"
