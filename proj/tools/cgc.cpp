#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cgc/config.hpp"
#include "cgc/errors.hpp"
#include "cgc/features.hpp"
#include "cgc/graph.hpp"
#include "cgc/model.hpp"
#include "cgc/pnm.hpp"
#include "cgc/svg.hpp"
#include "cgc/synth.hpp"
#include "cgc/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Duplicates every epoch log line to an optional file while it streams to
// stdout.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int ch) override {
    if (ch == EOF) return !EOF;
    const int ra = a_->sputc(static_cast<char>(ch));
    const int rb = b_ ? b_->sputc(static_cast<char>(ch)) : ch;
    return ra == EOF || rb == EOF ? EOF : ch;
  }
  int sync() override {
    const int ra = a_->pubsync();
    const int rb = b_ ? b_->pubsync() : 0;
    return ra == 0 && rb == 0 ? 0 : -1;
  }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

struct BuildGraphArgs {
  std::string labels, image, out, config;
  std::uint64_t seed = 0;
};

struct SynthArgs {
  int classes = 3;
  int per_class = 0;
  std::string out;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string data, model_config, train_config, out, log;
  int epochs_override = -1;
};

struct PredictArgs {
  std::vector<std::string> graphs;
  std::string ckpt;
  bool group_by_image = false;
};

struct VizArgs {
  std::string graph, ckpt, out;
  int stage = 1;
};

int cmd_build_graph(const BuildGraphArgs& a) {
  const cgc::GrayImage labels = cgc::read_pnm(a.labels);
  const cgc::GrayImage image = cgc::read_pnm(a.image);
  const auto descriptors = cgc::build_descriptors(labels, image);
  if (descriptors.empty())
    throw cgc::Error("empty graph: label map '" + a.labels + "' contains no instances");

  cgc::SamplerConfig sampler;
  cgc::EdgeConfig edge;
  if (!a.config.empty())
    cgc::apply_graph_config(sampler, edge, cgc::read_kv_file(a.config));
  sampler.validate();
  edge.validate();

  const std::string image_id = fs::path(a.labels).stem().string();
  const cgc::CellGraph g =
      cgc::assemble_graph(descriptors, sampler, edge, std::nullopt, a.seed, image_id);
  cgc::save_graph_bundle(g, a.out);
  std::printf("nodes=%d edges=%zu out=%s\n", g.n, g.edges.size(), a.out.c_str());
  return 0;
}

int cmd_synth(const SynthArgs& a) {
  if (a.classes != 3)
    throw cgc::ConfigError("synth: --classes must be 3 (grades normal/low/high)");
  if (a.per_class < 1) throw cgc::ConfigError("synth: --per-class must be >= 1");

  const cgc::SynthDataset ds = cgc::generate_dataset(a.per_class, a.seed);
  fs::create_directories(a.out);

  json manifest;
  manifest["seed"] = a.seed;
  manifest["per_class"] = a.per_class;
  manifest["train"] = json::array();
  manifest["test"] = json::array();
  for (const cgc::CellGraph& g : ds.train) {
    cgc::save_graph_bundle(g, (fs::path(a.out) / g.image_id).string());
    manifest["train"].push_back(g.image_id);
  }
  for (const cgc::CellGraph& g : ds.test) {
    cgc::save_graph_bundle(g, (fs::path(a.out) / g.image_id).string());
    manifest["test"].push_back(g.image_id);
  }

  const std::string manifest_path = (fs::path(a.out) / "split.json").string();
  std::ofstream mf(manifest_path, std::ios::binary);
  if (!mf) throw cgc::IoError("cannot write split manifest: " + manifest_path);
  mf << manifest.dump(2) << "\n";
  if (!mf.flush()) throw cgc::IoError("failed writing split manifest: " + manifest_path);
  std::printf("train=%zu test=%zu out=%s\n", ds.train.size(), ds.test.size(),
              a.out.c_str());
  return 0;
}

std::vector<cgc::CellGraph> load_split(const fs::path& data, const json& ids) {
  std::vector<cgc::CellGraph> graphs;
  graphs.reserve(ids.size());
  for (const auto& id : ids)
    graphs.push_back(cgc::load_graph_bundle((data / id.get<std::string>()).string()));
  return graphs;
}

int cmd_train(const TrainArgs& a) {
  const fs::path data(a.data);
  std::ifstream mf(data / "split.json");
  if (!mf) throw cgc::IoError("cannot read split manifest: " + (data / "split.json").string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw cgc::IoError("malformed split manifest: " + std::string(e.what()));
  }
  const std::vector<cgc::CellGraph> train_set = load_split(data, manifest.at("train"));
  const std::vector<cgc::CellGraph> val_set = load_split(data, manifest.at("test"));

  cgc::ModelConfig mcfg;
  if (!a.model_config.empty())
    cgc::apply_model_config(mcfg, cgc::read_kv_file(a.model_config));
  cgc::TrainConfig tcfg;
  if (!a.train_config.empty())
    cgc::apply_train_config(tcfg, cgc::read_kv_file(a.train_config));
  if (a.epochs_override >= 0) tcfg.epochs = a.epochs_override;
  mcfg.validate();
  tcfg.validate();

  std::ofstream logfile;
  if (!a.log.empty()) {
    logfile.open(a.log, std::ios::binary);
    if (!logfile) throw cgc::IoError("cannot write epoch log: " + a.log);
  }
  TeeBuf tee(std::cout.rdbuf(), logfile.is_open() ? logfile.rdbuf() : nullptr);
  std::ostream log(&tee);

  const cgc::TrainResult result = cgc::train(train_set, val_set, mcfg, tcfg, &log);
  cgc::save_checkpoint(a.out, result.checkpoint);

  double final_val = 0.0;
  if (!result.reports.empty())
    final_val = result.reports.back().val_acc;
  else if (!val_set.empty())
    final_val = cgc::evaluate(val_set, result.checkpoint).accuracy;
  std::printf("checkpoint=%s final_val_acc=%.4f\n", a.out.c_str(), final_val);
  return 0;
}

int cmd_predict(const PredictArgs& a) {
  const cgc::Checkpoint ckpt = cgc::load_checkpoint(a.ckpt);
  std::map<std::string, std::vector<int>> by_image;
  for (const std::string& dir : a.graphs) {
    const cgc::CellGraph g = cgc::load_graph_bundle(dir);
    const cgc::Mat probs = cgc::predict_probs(g, ckpt);
    int pred = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c)
      if (probs(0, c) > probs(0, pred)) pred = static_cast<int>(c);
    std::string probs_text;
    char buf[32];
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.12f", probs(0, c));
      probs_text += (c ? "," : "") + std::string(buf);
    }
    std::printf("graph=%s class=%d probs=%s\n", dir.c_str(), pred, probs_text.c_str());
    by_image[g.image_id.empty() ? dir : g.image_id].push_back(pred);
  }
  if (a.group_by_image) {
    for (const auto& [id, votes] : by_image)
      std::printf("image=%s class=%d votes=%zu\n", id.c_str(),
                  cgc::majority_vote(votes), votes.size());
  }
  return 0;
}

int cmd_viz_clusters(const VizArgs& a) {
  const cgc::Checkpoint ckpt = cgc::load_checkpoint(a.ckpt);
  if (a.stage < 1 || a.stage > ckpt.model.n_stages)
    throw cgc::ConfigError("viz-clusters: --stage must be in [1, " +
                           std::to_string(ckpt.model.n_stages) + "]");
  const cgc::CellGraph g = cgc::load_graph_bundle(a.graph);

  cgc::ad::Tape t;
  cgc::ForwardOptions opts;
  opts.reweight_p = g.edge.p;
  const cgc::Mat x = cgc::model_input(g, ckpt.norm);
  const cgc::ForwardResult fwd =
      cgc::model_forward(t, ckpt.params, x, g.reweighted(), ckpt.model, opts);
  const std::vector<int> ids = cgc::hard_cluster_ids(fwd, a.stage - 1);

  const std::string title =
      (g.image_id.empty() ? std::string("graph") : g.image_id) + " stage " +
      std::to_string(a.stage);
  cgc::write_cluster_svg(a.out, g, ids, title);
  std::printf("svg=%s nodes=%d\n", a.out.c_str(), g.n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell-graph pipeline: descriptors, graph building, hierarchical "
               "GNN training, prediction, and cluster visualization"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  app.add_flag("--print-config", print_config,
               "Print every default setting (model, train, graph) and exit");

  BuildGraphArgs bg;
  CLI::App* cb = app.add_subcommand(
      "build-graph", "Build a cell-graph bundle from label/intensity graymaps");
  cb->add_option("--labels", bg.labels, "Instance label graymap (PGM)")->required();
  cb->add_option("--image", bg.image, "Intensity graymap (PGM)")->required();
  cb->add_option("--out", bg.out, "Output bundle directory")->required();
  cb->add_option("--config", bg.config, "Graph key-value config file");
  cb->add_option("--seed", bg.seed, "Sampling seed");

  SynthArgs sy;
  CLI::App* cs = app.add_subcommand(
      "synth", "Generate a balanced synthetic dataset of graph bundles");
  cs->add_option("--classes", sy.classes, "Number of classes (must be 3)");
  cs->add_option("--per-class", sy.per_class, "Samples per class")->required();
  cs->add_option("--out", sy.out, "Output dataset directory")->required();
  cs->add_option("--seed", sy.seed, "Dataset seed");

  TrainArgs tr;
  CLI::App* ct = app.add_subcommand("train", "Train a classifier on a dataset");
  ct->add_option("--data", tr.data, "Dataset directory with split.json")->required();
  ct->add_option("--model-config", tr.model_config, "Model key-value config file");
  ct->add_option("--train-config", tr.train_config, "Training key-value config file");
  ct->add_option("--out", tr.out, "Checkpoint output path")->required();
  ct->add_option("--epochs", tr.epochs_override, "Override the configured epoch count");
  ct->add_option("--log", tr.log, "Also write epoch lines to this file");

  PredictArgs pr;
  CLI::App* cp = app.add_subcommand("predict", "Classify graph bundles");
  cp->add_option("--graph", pr.graphs, "Graph bundle directory (repeatable)")->required();
  cp->add_option("--ckpt", pr.ckpt, "Checkpoint path")->required();
  cp->add_flag("--group-by-image", pr.group_by_image,
               "Majority-vote patches sharing an image id");

  VizArgs vz;
  CLI::App* cv = app.add_subcommand(
      "viz-clusters", "Render the hard cluster map of a graph as SVG");
  cv->add_option("--graph", vz.graph, "Graph bundle directory")->required();
  cv->add_option("--ckpt", vz.ckpt, "Checkpoint path")->required();
  cv->add_option("--stage", vz.stage, "1-based clustering stage")->required();
  cv->add_option("--out", vz.out, "Output SVG path")->required();

  try {
    app.parse(argc, argv);
    if (print_config) {
      std::cout << "# model\n" << cgc::format_model_config(cgc::ModelConfig{})
                << "# train\n" << cgc::format_train_config(cgc::TrainConfig{})
                << "# graph\n"
                << cgc::format_graph_config(cgc::SamplerConfig{}, cgc::EdgeConfig{});
      return 0;
    }
    if (cb->parsed()) return cmd_build_graph(bg);
    if (cs->parsed()) return cmd_synth(sy);
    if (ct->parsed()) return cmd_train(tr);
    if (cp->parsed()) return cmd_predict(pr);
    if (cv->parsed()) return cmd_viz_clusters(vz);
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const cgc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const cgc::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 2;
  } catch (const cgc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
