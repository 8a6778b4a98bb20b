#include "hospx/model_io.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "hospx/networks.h"

namespace hospx {
namespace {

constexpr char kMagic[8] = {'H', 'O', 'S', 'P', 'X', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void Put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Take(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) Fail(ErrorKind::kIo, "truncated model file '" + path + "'");
  return v;
}

}  // namespace

void WriteModel(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write '" + path + "'");
  nlohmann::ordered_json header;
  header["family"] = ToString(model.family);
  header["hyperparams"] = model.hyperparams;
  header["scenario"] = model.scenario;
  header["seed"] = model.seed;
  header["fold"] = model.fold;
  header["h"] = model.h;
  header["m"] = model.m;
  header["t"] = model.t;
  header["loss_curve"] = model.loss_curve;
  if (model.forest) {
    header["n_features"] = model.forest->n_features();
    header["class_weights"] = model.forest->class_weights();
  }
  if (model.network) header["input_dim"] = model.network->input_dim();
  const std::string text = header.dump();
  out.write(kMagic, sizeof(kMagic));
  Put<std::uint32_t>(out, kVersion);
  Put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (model.forest) {
    Put<std::uint64_t>(out, model.forest->trees().size());
    for (const auto& tree : model.forest->trees()) {
      Put<std::uint64_t>(out, tree.nodes().size());
      for (const auto& n : tree.nodes()) {
        Put<std::int32_t>(out, n.feature);
        Put<double>(out, n.threshold);
        Put<std::int32_t>(out, n.left);
        Put<std::int32_t>(out, n.right);
        Put<double>(out, n.value);
        Put<double>(out, n.cover);
        Put<double>(out, n.count0);
        Put<double>(out, n.count1);
      }
    }
  } else if (model.network) {
    const auto params = model.network->Params();
    Put<std::uint64_t>(out, params.size());
    for (const Param* p : params) {
      Put<std::uint64_t>(out, p->value.size());
      out.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
  } else {
    Fail(ErrorKind::kInvalidArgument, "model has no parameters");
  }
  if (!out) Fail(ErrorKind::kIo, "write failed for '" + path + "'");
}

TrainedModel ReadModel(const std::string& path) {
  if (!std::filesystem::exists(path)) Fail(ErrorKind::kMissingArtifact, "model file '" + path + "' not found");
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot read '" + path + "'");
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    Fail(ErrorKind::kIo, "'" + path + "' is not a model file");
  }
  if (Take<std::uint32_t>(in, path) != kVersion) Fail(ErrorKind::kIo, "unsupported model version in '" + path + "'");
  const auto len = Take<std::uint64_t>(in, path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) Fail(ErrorKind::kIo, "truncated model file '" + path + "'");
  TrainedModel model;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    model.family = ParseModelFamily(header.at("family").get<std::string>());
    model.hyperparams = header.at("hyperparams");
    model.scenario = header.at("scenario").get<std::string>();
    model.seed = header.at("seed").get<std::uint64_t>();
    model.fold = header.at("fold").get<int>();
    model.h = header.at("h").get<std::size_t>();
    model.m = header.at("m").get<std::size_t>();
    model.t = header.at("t").get<std::size_t>();
    model.loss_curve = header.at("loss_curve").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kIo, "bad model header in '" + path + "': " + e.what());
  }
  if (IsForest(model.family)) {
    const auto n_trees = Take<std::uint64_t>(in, path);
    std::vector<DecisionTree> trees;
    for (std::uint64_t t = 0; t < n_trees; ++t) {
      std::vector<TreeNode> nodes(Take<std::uint64_t>(in, path));
      for (auto& n : nodes) {
        n.feature = Take<std::int32_t>(in, path);
        n.threshold = Take<double>(in, path);
        n.left = Take<std::int32_t>(in, path);
        n.right = Take<std::int32_t>(in, path);
        n.value = Take<double>(in, path);
        n.cover = Take<double>(in, path);
        n.count0 = Take<double>(in, path);
        n.count1 = Take<double>(in, path);
      }
      trees.emplace_back(std::move(nodes));
    }
    const auto n_features = header.at("n_features").get<std::size_t>();
    for (const auto& t : trees) t.Validate(n_features);
    model.forest = ForestModel(
        model.family == ModelFamily::kRf ? ForestVariant::kRandomForest : ForestVariant::kExtraTrees,
        ForestParamsFromJson(model.hyperparams), header.at("class_weights").get<std::array<double, 2>>(),
        n_features, std::move(trees));
    return model;
  }
  std::shared_ptr<Network> net;
  if (model.family == ModelFamily::kMlp) {
    net = MakeMlp(MlpConfigFromJson(model.hyperparams, header.at("input_dim").get<std::size_t>()), 0);
  } else {
    net = MakeFusion(FusionConfigFromJson(model.hyperparams, model.h, model.m, model.t), 0);
  }
  const auto params = net->Params();
  if (Take<std::uint64_t>(in, path) != params.size()) Fail(ErrorKind::kIo, "parameter count mismatch in '" + path + "'");
  for (Param* p : params) {
    if (Take<std::uint64_t>(in, path) != p->value.size()) {
      Fail(ErrorKind::kIo, "parameter shape mismatch for " + p->name + " in '" + path + "'");
    }
    in.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!in) Fail(ErrorKind::kIo, "truncated model file '" + path + "'");
  }
  model.network = std::move(net);
  return model;
}

}  // namespace hospx
