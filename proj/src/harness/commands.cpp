#include "fhescale/harness/commands.hpp"

#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "fhescale/data/movielens.hpp"
#include "fhescale/fhe/circuit.hpp"
#include "fhescale/fhe/crypto.hpp"
#include "fhescale/fhe/model.hpp"
#include "fhescale/harness/metrics_io.hpp"
#include "fhescale/harness/plots.hpp"
#include "fhescale/harness/training.hpp"

namespace fhescale::harness {

namespace fs = std::filesystem;

ExperimentConfig resolve_config(const CommonOptions& common) {
  ExperimentConfig c = common.config ? load_config(*common.config) : preset_config("default");
  if (common.seed) c.seed = *common.seed;
  if (common.out) c.output_dir = common.out->string();
  c.validate();
  return c;
}

namespace {

fs::path prepare_out(const ExperimentConfig& c) {
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  return dir;
}

/// Runs a command body, mapping exceptions to exit codes.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    fmt::print(err, "error: invalid config: {}\n", e.what());
    return kExitUsage;
  } catch (const data::ParseError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitFailure;
  } catch (const fhe::NoiseOverflowError& e) {
    fmt::print(err, "error: noise budget exceeded: {}\n", e.what());
    return kExitFailure;
  } catch (const fhe::CompileError& e) {
    fmt::print(err, "error: compile failed: {}\n", e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitFailure;
  }
}

data::Dataset load_or_synthesize(const std::optional<fs::path>& path, const ExperimentConfig& c) {
  if (!path) return data::synth_dataset(c.seed, static_cast<std::size_t>(c.data.synthetic_users));
  std::ifstream in(*path);
  if (!in) throw std::runtime_error("cannot open dataset " + path->string());
  return data::read_dataset(in);
}

}  // namespace

int cmd_data(const CommonOptions& common, const DataOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto c = resolve_config(common);
    if (opts.users) c.data.synthetic_users = *opts.users;
    c.validate();
    const auto ds = opts.input ? data::build_dataset(data::read_ratings_file(*opts.input))
                               : data::synth_dataset(c.seed, static_cast<std::size_t>(c.data.synthetic_users));
    const auto path = prepare_out(c) / "dataset.txt";
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path.string());
    data::write_dataset(ds, file);

    fmt::print(out, "source: {}\n", opts.input ? opts.input->string() : fmt::format("synthetic (seed {}, {} users)", c.seed, c.data.synthetic_users));
    fmt::print(out, "n_samples: {}\n", ds.n_samples());
    fmt::print(out, "films ({}):", ds.films.size());
    for (auto id : ds.films) fmt::print(out, " {}", id);
    fmt::print(out, "\nwrote {}\n", path.string());
    return kExitOk;
  });
}

int cmd_fhe_demo(const CommonOptions& common, const FheDemoOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto c = resolve_config(common);
    auto& f = c.fhe;
    if (opts.bits) f.bits = *opts.bits;
    if (opts.inferences) f.inferences = *opts.inferences;
    if (opts.degree) f.activation_degree = *opts.degree;
    if (opts.activation) f.activation = true;
    if (opts.no_bootstrap) f.bootstrapping = false;
    c.validate();

    const auto ds = load_or_synthesize(opts.dataset, c);
    if (ds.n_samples() == 0) throw std::runtime_error("dataset has no samples");
    const auto view = ds.view();
    const auto trained = fhe::train_logreg(view, {f.train_learning_rate, f.train_epochs, c.seed, 0.01});
    const auto& model = trained.model;

    fhe::CompileOptions copt;
    copt.bits = f.bits;
    copt.input_lo = f.input_lo;
    copt.input_hi = f.input_hi;
    copt.activation = f.activation;
    copt.activation_degree = f.activation_degree;
    copt.key_seed = c.seed;
    const auto bundle = fhe::compile_circuit(model, copt);
    const auto keys = fhe::keygen(c.seed, copt.noise);
    const auto client = bundle.client_params();
    const auto circuit = bundle.circuit();

    const fs::path csv_path = prepare_out(c) / "fhe_demo.csv";
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
    csv << "inference,sample,label,float_class,quantized_class,encrypted_class,match,multiplications,bootstraps,"
           "simulated_s\n";

    const std::size_t nf = view.n_features;
    int matches = 0, float_agree = 0, float_correct = 0, enc_correct = 0, clamped = 0;
    double sim_total = 0.0;
    for (int i = 0; i < f.inferences; ++i) {
      const auto s = static_cast<std::size_t>(i) % ds.n_samples();
      const std::span<const double> x(ds.features.data() + s * nf, nf);
      const auto enc = fhe::encrypt(client, keys.secret, x, static_cast<std::uint64_t>(i) + 1);
      const auto res = fhe::evaluate(bundle, keys.eval, enc.values, f.bootstrapping);
      const auto pred = fhe::decrypt(keys.secret, client, res.scores);
      const auto plain = fhe::forward_plain(circuit, fhe::quantize_input(bundle.input, x).values);
      const auto fscores = fhe::predict_plaintext(model, x);

      const auto float_class = fhe::argmax<double>(fscores);
      const auto quant_class = fhe::argmax<std::int64_t>(plain);
      const bool match = pred.raw == plain;
      const double sim_s = f.base_cost_s + f.cost_per_mul_s * res.stats.multiplications +
                           f.cost_per_bootstrap_s * res.stats.bootstraps;
      matches += match;
      float_agree += float_class == quant_class;
      float_correct += static_cast<int>(float_class) == ds.labels[s];
      enc_correct += static_cast<int>(pred.best_class) == ds.labels[s];
      clamped += !enc.clamped.empty();
      sim_total += sim_s;
      fmt::print(csv, "{},{},{},{},{},{},{},{},{},{:.6f}\n", i, s, ds.labels[s], float_class, quant_class,
                 pred.best_class, match ? 1 : 0, res.stats.multiplications, res.stats.bootstraps, sim_s);
    }

    const int n = f.inferences;
    auto pct = [n](int k) { return n ? 100.0 * k / n : 100.0; };
    fmt::print(out, "samples: {} ({} features, {} classes)\n", ds.n_samples(), nf, view.n_classes);
    fmt::print(out, "float model: train accuracy {:.4f}, final loss {:.6f}\n", fhe::accuracy(model, view),
               trained.loss_history.empty() ? 0.0 : trained.loss_history.back());
    fmt::print(out, "circuit: {}-bit weights, activation {}, max required bits {} of {}\n", f.bits,
               f.activation ? fmt::format("degree {}", f.activation_degree) : std::string("none"),
               bundle.ranges.max_required_bits(), bundle.capacity_bits);
    fmt::print(out, "encrypted == quantized-plaintext: {}/{}\n", matches, n);
    fmt::print(out, "float vs quantized agreement: {}/{} ({:.2f}%)\n", float_agree, n, pct(float_agree));
    fmt::print(out, "label accuracy: float {:.2f}%, encrypted {:.2f}%\n", pct(float_correct), pct(enc_correct));
    fmt::print(out, "inputs clamped to [{}, {}]: {}\n", f.input_lo, f.input_hi, clamped);
    fmt::print(out, "simulated time per inference: {:.4f} s (bootstrapping {})\n", n ? sim_total / n : 0.0,
               f.bootstrapping ? "on" : "off");
    fmt::print(out, "wrote {}\n", csv_path.string());
    return matches == n ? kExitOk : kExitFailure;
  });
}

int cmd_train(const CommonOptions& common, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto c = resolve_config(common);
    const auto dir = prepare_out(c);
    TrainSpec spec{c.env, c.ppo, c.layout, c.policy_head_scale, c.episodes, c.seed};
    const auto result = train_agent(spec);

    write_step_csv(result.steps, dir / "step_metrics.csv");
    write_episode_csv(result.episodes, dir / "episode_metrics.csv");
    ppo::save_checkpoint(result.net, dir / "policy.bin");
    {
      std::ofstream cfg(dir / "config.json", std::ios::binary);
      cfg << to_json(c).dump(2) << '\n';
    }
    write_figures(result.episodes, dir);

    const std::size_t n = result.episodes.size(), tail = std::min<std::size_t>(20, n);
    double rew = 0, rep = 0, lat = 0;
    for (std::size_t i = n - tail; i < n; ++i) {
      rew += result.episodes[i].mean_reward;
      rep += result.episodes[i].mean_replicas;
      lat += result.episodes[i].mean_latency_s;
    }
    fmt::print(out, "preset {}, seed {}: {} episodes, {} steps, {} updates\n", c.preset, c.seed, n,
               result.steps.size(), result.updates.size());
    if (tail)
      fmt::print(out, "last {} episodes: mean reward {:.4f}, mean replicas {:.3f}, mean latency {:.4f} s\n", tail,
                 rew / tail, rep / tail, lat / tail);
    fmt::print(out, "wrote {}\n", dir.string());
    return kExitOk;
  });
}

int cmd_eval(const CommonOptions& common, const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto c = resolve_config(common);
    const int episodes = opts.episodes.value_or(c.eval_episodes);
    if (episodes < 0) throw ConfigError("episodes: must be >= 0");
    const auto ckpt = opts.checkpoint.value_or(fs::path(c.output_dir) / "policy.bin");
    const auto net = ppo::load_checkpoint(ckpt, c.layout);
    const auto dir = prepare_out(c);
    const auto result = evaluate_policy(net, c.env, episodes, mix_seed(c.seed, 0xE7A1));
    write_step_csv(result.steps, dir / "eval_step_metrics.csv");
    write_episode_csv(result.episodes, dir / "eval_episode_metrics.csv");

    fmt::print(out, "{:>8} {:>12} {:>12} {:>12} {:>10}\n", "episode", "mean_reward", "latency_s", "replicas", "pods");
    double rew = 0, lat = 0, rep = 0, pods = 0;
    for (const auto& e : result.episodes) {
      fmt::print(out, "{:>8} {:>12.4f} {:>12.4f} {:>12.3f} {:>10.3f}\n", e.episode, e.mean_reward, e.mean_latency_s,
                 e.mean_replicas, e.mean_pods);
      rew += e.mean_reward;
      lat += e.mean_latency_s;
      rep += e.mean_replicas;
      pods += e.mean_pods;
    }
    if (!result.episodes.empty()) {
      const double k = static_cast<double>(result.episodes.size());
      fmt::print(out, "{:>8} {:>12.4f} {:>12.4f} {:>12.3f} {:>10.3f}\n", "mean", rew / k, lat / k, rep / k, pods / k);
    }
    return kExitOk;
  });
}

int cmd_plot(const CommonOptions& common, const PlotOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto c = resolve_config(common);
    const auto in_dir = opts.input_dir.value_or(fs::path(c.output_dir));
    const auto episodes = read_episode_csv(in_dir / "episode_metrics.csv");
    for (const auto& p : write_figures(episodes, prepare_out(c))) fmt::print(out, "wrote {}\n", p.string());
    return kExitOk;
  });
}

}  // namespace fhescale::harness
