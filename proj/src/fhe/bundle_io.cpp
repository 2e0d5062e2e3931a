#include "fhescale/fhe/bundle_io.hpp"

#include <fstream>
#include <json.hpp>

namespace fhescale::fhe {

using nlohmann::json;

namespace {

json tensor_to_json(const QuantizedTensor& t) {
  return {{"values", t.values}, {"scale", t.scale}, {"zero_point", t.zero_point}, {"bits", t.bits}};
}

QuantizedTensor tensor_from_json(const json& j) {
  QuantizedTensor t;
  t.values = j.at("values").get<std::vector<std::int64_t>>();
  t.scale = j.at("scale").get<double>();
  t.zero_point = j.at("zero_point").get<std::int64_t>();
  t.bits = j.at("bits").get<int>();
  return t;
}

json input_to_json(const InputQuant& q) {
  return {{"scale", q.scale}, {"zero_point", q.zero_point}, {"lo", q.lo}, {"hi", q.hi}, {"bits", q.bits}};
}

InputQuant input_from_json(const json& j) {
  InputQuant q;
  q.scale = j.at("scale").get<double>();
  q.zero_point = j.at("zero_point").get<std::int64_t>();
  q.lo = j.at("lo").get<double>();
  q.hi = j.at("hi").get<double>();
  q.bits = j.at("bits").get<int>();
  return q;
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BundleFormatError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleFormatError("cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw BundleFormatError(path.filename().string() + ": " + e.what());
  }
  const int version = doc.value("format_version", -1);
  if (version != kBundleFormatVersion) {
    throw BundleFormatError(path.filename().string() + ": unsupported format_version " +
                            std::to_string(version));
  }
  return doc;
}

}  // namespace

void save_bundle(const CircuitBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json circuit = {{"format_version", kBundleFormatVersion},
                  {"n_classes", bundle.model.n_classes},
                  {"n_features", bundle.model.n_features},
                  {"capacity_bits", bundle.capacity_bits},
                  {"weights", tensor_to_json(bundle.model.weights)},
                  {"bias", tensor_to_json(bundle.model.bias)}};
  if (bundle.activation) {
    circuit["activation"] = {{"coefficients", bundle.activation->coefficients},
                             {"fit_lo", bundle.activation->fit_lo},
                             {"fit_hi", bundle.activation->fit_hi},
                             {"max_abs_error", bundle.activation->max_abs_error}};
  }
  if (bundle.activation_int) {
    circuit["activation_int"] = {{"coefficients", bundle.activation_int->coefficients},
                                 {"frac_bits", bundle.activation_int->frac_bits},
                                 {"input_scale", bundle.activation_int->input_scale}};
  }
  json ranges = json::array();
  for (const auto& e : bundle.ranges.entries) {
    ranges.push_back({{"node", e.node},
                      {"lo", e.interval.lo},
                      {"hi", e.interval.hi},
                      {"required_bits", e.required_bits}});
  }
  circuit["ranges"] = {{"input", {bundle.ranges.input.lo, bundle.ranges.input.hi}},
                       {"nodes", std::move(ranges)}};
  write_json(dir / kCircuitFile, circuit);

  write_json(dir / kEvalKeyFile,
             {{"format_version", kBundleFormatVersion},
              {"key_id", bundle.eval_key.key_id},
              {"noise",
               {{"max_budget", bundle.eval_key.noise.max_budget},
                {"bootstrap_threshold", bundle.eval_key.noise.bootstrap_threshold}}}});

  const ClientParams client = bundle.client_params();
  write_json(dir / kClientFile, {{"format_version", kBundleFormatVersion},
                                 {"n_features", client.n_features},
                                 {"n_classes", client.n_classes},
                                 {"input", input_to_json(client.input)},
                                 {"output_scale", client.output_scale},
                                 {"key_id", client.key_id}});
}

CircuitBundle load_bundle(const std::filesystem::path& dir) {
  const json circuit = read_json(dir / kCircuitFile);
  const json key = read_json(dir / kEvalKeyFile);
  const json client = read_json(dir / kClientFile);
  try {
    CircuitBundle b;
    b.model.n_classes = circuit.at("n_classes").get<std::size_t>();
    b.model.n_features = circuit.at("n_features").get<std::size_t>();
    b.capacity_bits = circuit.at("capacity_bits").get<int>();
    b.model.weights = tensor_from_json(circuit.at("weights"));
    b.model.bias = tensor_from_json(circuit.at("bias"));
    if (circuit.contains("activation")) {
      const auto& a = circuit["activation"];
      b.activation = ActivationPoly{a.at("coefficients").get<std::vector<double>>(),
                                    a.at("fit_lo").get<double>(), a.at("fit_hi").get<double>(),
                                    a.at("max_abs_error").get<double>()};
    }
    if (circuit.contains("activation_int")) {
      const auto& a = circuit["activation_int"];
      b.activation_int = IntegerPoly{a.at("coefficients").get<std::vector<std::int64_t>>(),
                                     a.at("frac_bits").get<int>(), a.at("input_scale").get<double>()};
    }
    const auto& ranges = circuit.at("ranges");
    b.ranges.input = {ranges.at("input").at(0).get<std::int64_t>(),
                      ranges.at("input").at(1).get<std::int64_t>()};
    for (const auto& e : ranges.at("nodes")) {
      b.ranges.entries.push_back(RangeEntry{e.at("node").get<std::string>(),
                                            {e.at("lo").get<std::int64_t>(), e.at("hi").get<std::int64_t>()},
                                            e.at("required_bits").get<int>()});
    }
    b.eval_key.key_id = key.at("key_id").get<std::uint64_t>();
    b.eval_key.noise.max_budget = key.at("noise").at("max_budget").get<int>();
    b.eval_key.noise.bootstrap_threshold = key.at("noise").at("bootstrap_threshold").get<int>();
    b.input = input_from_json(client.at("input"));

    if (b.model.weights.values.size() != b.model.n_classes * b.model.n_features ||
        b.model.bias.values.size() != b.model.n_classes) {
      throw BundleFormatError("circuit tensors do not match declared dimensions");
    }
    if (client.at("key_id").get<std::uint64_t>() != b.eval_key.key_id) {
      throw BundleFormatError("client.json and eval_key.json disagree on key_id");
    }
    if (client.at("n_features").get<std::size_t>() != b.model.n_features ||
        client.at("n_classes").get<std::size_t>() != b.model.n_classes) {
      throw BundleFormatError("client.json dimensions disagree with circuit.json");
    }
    return b;
  } catch (const json::exception& e) {
    throw BundleFormatError(std::string("malformed bundle: ") + e.what());
  }
}

}  // namespace fhescale::fhe
