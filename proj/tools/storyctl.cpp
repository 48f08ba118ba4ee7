// Copyright 2026 The Storyctl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "storyctl/decoding/decode.hpp"
#include "storyctl/metrics/controllability.hpp"
#include "storyctl/metrics/report.hpp"
#include "storyctl/model/checkpoint.hpp"
#include "storyctl/pipeline.hpp"
#include "storyctl/selection/frame_predictor.hpp"
#include "storyctl/selection/rerank.hpp"
#include "storyctl/service/config.hpp"
#include "storyctl/service/http.hpp"

#include <CLI11.hpp>

namespace {

using namespace storyctl;

std::vector<Story> load_corpora(const std::vector<std::string>& paths) {
  std::vector<Story> out;
  for (const auto& p : paths) {
    auto part = load_corpus(p);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

KeyValueConfig load_config(const std::string& path) {
  return path.empty() ? KeyValueConfig() : KeyValueConfig::load(path);
}

void warn_unused(const KeyValueConfig& cfg) {
  for (const auto& k : cfg.unused()) std::cerr << "warning: unused config key " << k << '\n';
}

std::pair<std::string, std::string> split_named(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) return {std::filesystem::path(spec).stem().string(), spec};
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

GenerationList load_generations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open generations");
  return read_generations(in, path);
}

void save_generations(const std::string& path, const GenerationList& list) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot write generations");
  write_generations(out, list);
}

void write_text(const std::string& path, const std::string& text, bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot write");
  out << text;
}

// Attribute value of a story read from its sidecar record.
AttributeValue oracle_value(const Seq2Seq<double>& model, const Sidecar& sidecar, const Story& s) {
  const auto& e = model.embedder();
  if (e.type == AttributeType::kNone) return {};
  if (e.type == AttributeType::kBow) {
    AttributeValue v;
    v.vector = bow_embed(s.continuation, e.word_table);
    return v;
  }
  const Annotation* a = sidecar.find(s.id);
  if (!a) throw ContractError("story " + s.id + " has no annotation");
  return e.value_from(*a, s.continuation);
}

std::array<std::vector<double>, 4> context_frame_vectors(const Story& s, const Lexicons& lex,
                                                         const FrameInventory& inventory) {
  std::array<std::vector<double>, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = frame_vector(resolve_frames(annotate_heuristic(s.context[i], lex).frames, inventory));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"storyctl: attribute-controlled story continuation"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed");

  const std::vector<std::string> attribute_names = {"none", "sentiment", "length3", "length30",
                                                    "predicates", "frames", "clusters", "bow"};

  // synth
  auto* synth = app.add_subcommand("synth", "write the synthetic corpus bundle");
  std::string synth_out;
  std::uint64_t synth_seed = 7;
  std::size_t synth_stories = 500;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--corpus-seed", synth_seed, "generator seed");
  synth->add_option("--stories", synth_stories, "number of stories");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "heuristic sidecar annotation");
  std::vector<std::string> annotate_corpora;
  std::string annotate_lexicons, annotate_out, annotate_check;
  annotate->add_option("--corpus", annotate_corpora, "corpus TSV files")->required();
  annotate->add_option("--lexicons", annotate_lexicons, "lexicon directory")->required();
  annotate->add_option("--out", annotate_out, "sidecar JSONL output")->required();
  annotate->add_option("--check", annotate_check, "gold sidecar to compare against");

  // cluster
  auto* cluster = app.add_subcommand("cluster", "k-means over continuation BOW vectors");
  std::string cluster_train, cluster_sidecar, cluster_embeddings, cluster_out, cluster_sidecar_out;
  std::vector<std::string> cluster_label;
  std::size_t cluster_k = 5;
  cluster->add_option("--train", cluster_train, "training corpus")->required();
  cluster->add_option("--label", cluster_label, "extra corpora to label");
  cluster->add_option("--sidecar", cluster_sidecar, "sidecar to update")->required();
  cluster->add_option("--sidecar-out", cluster_sidecar_out, "updated sidecar (default: in place)");
  cluster->add_option("--embeddings", cluster_embeddings, "GloVe text file")->required();
  cluster->add_option("--k", cluster_k, "cluster count");
  cluster->add_option("--out", cluster_out, "cluster model JSON")->required();

  // fit-pca
  auto* pca_cmd = app.add_subcommand("fit-pca", "PCA over training predicate embeddings");
  std::string pca_train, pca_sidecar, pca_embeddings, pca_out;
  std::size_t pca_k = 64;
  pca_cmd->add_option("--train", pca_train, "training corpus")->required();
  pca_cmd->add_option("--sidecar", pca_sidecar, "sidecar")->required();
  pca_cmd->add_option("--embeddings", pca_embeddings, "GloVe text file")->required();
  pca_cmd->add_option("--k", pca_k, "components");
  pca_cmd->add_option("--out", pca_out, "PCA JSON")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train an attribute-conditioned model");
  std::string attribute = "none", train_path, dev_path, sidecar_path, embeddings_path, pca_path,
              clusters_path, model_out;
  int precision = 64;
  std::size_t vocab_size = 10000;
  train_cmd->add_option("--attribute", attribute, "control attribute")->check(CLI::IsMember(attribute_names));
  train_cmd->add_option("--train", train_path, "training corpus")->required();
  train_cmd->add_option("--dev", dev_path, "development corpus")->required();
  train_cmd->add_option("--sidecar", sidecar_path, "sidecar annotations");
  train_cmd->add_option("--embeddings", embeddings_path, "GloVe text file (predicates, bow, clusters)");
  train_cmd->add_option("--pca", pca_path, "PCA JSON (predicates)");
  train_cmd->add_option("--clusters", clusters_path, "cluster model JSON (clusters)");
  train_cmd->add_option("--precision", precision, "32 or 64")->check(CLI::IsMember({32, 64}));
  train_cmd->add_option("--vocab-size", vocab_size, "vocabulary size");
  train_cmd->add_option("--out", model_out, "checkpoint path")->required();

  // train-reverse
  auto* reverse_cmd = app.add_subcommand("train-reverse", "train the continuation -> context model");
  std::string rev_train, rev_dev, rev_out;
  reverse_cmd->add_option("--train", rev_train, "training corpus")->required();
  reverse_cmd->add_option("--dev", rev_dev, "development corpus")->required();
  reverse_cmd->add_option("--out", rev_out, "checkpoint path")->required();

  // train-frame-predictor
  auto* fp_cmd = app.add_subcommand("train-frame-predictor", "train the frame-vector predictor");
  std::string fp_train, fp_dev, fp_sidecar, fp_out;
  fp_cmd->add_option("--train", fp_train, "training corpus")->required();
  fp_cmd->add_option("--dev", fp_dev, "development corpus")->required();
  fp_cmd->add_option("--sidecar", fp_sidecar, "sidecar with context frames")->required();
  fp_cmd->add_option("--out", fp_out, "checkpoint path")->required();

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "decode continuations");
  std::string gen_model, gen_corpus, gen_sidecar, gen_out, gen_mode = "oracle", gen_predictor, gen_lexicons;
  std::size_t beam = 1, gen_n = 1, gen_limit = 0;
  double temperature = 0.0;
  std::vector<std::string> gen_values;
  gen_cmd->add_option("--model", gen_model, "checkpoint")->required();
  gen_cmd->add_option("--corpus", gen_corpus, "stories to continue")->required();
  gen_cmd->add_option("--sidecar", gen_sidecar, "sidecar (oracle mode)");
  gen_cmd->add_option("--mode", gen_mode, "oracle | per-attribute | values | predict")
      ->check(CLI::IsMember({"oracle", "per-attribute", "values", "predict"}));
  gen_cmd->add_option("--values", gen_values, "JSON attribute values (values mode)");
  gen_cmd->add_option("--beam", beam, "beam width (1 = greedy)");
  gen_cmd->add_option("--n", gen_n, "continuations per context");
  gen_cmd->add_option("--temperature", temperature, "sample with this temperature instead of beam search");
  gen_cmd->add_option("--predictor", gen_predictor, "frame predictor (predict mode)");
  gen_cmd->add_option("--lexicons", gen_lexicons, "lexicons (predict mode)");
  gen_cmd->add_option("--limit", gen_limit, "only the first N stories");
  gen_cmd->add_option("--out", gen_out, "generation JSONL")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "metric and controllability reports");
  std::string eval_kind = "lists", eval_corpus, eval_sidecar, eval_model, eval_lexicons, eval_generations,
              eval_prefix, eval_title;
  std::vector<std::string> eval_systems, eval_ppl;
  bool multi_ref = false;
  eval_cmd->add_option("--kind", eval_kind, "oracle | lists | control")
      ->check(CLI::IsMember({"oracle", "lists", "control"}));
  eval_cmd->add_option("--corpus", eval_corpus, "gold stories");
  eval_cmd->add_option("--sidecar", eval_sidecar, "sidecar (perplexity)");
  eval_cmd->add_option("--system", eval_systems, "NAME=generations.jsonl");
  eval_cmd->add_option("--ppl", eval_ppl, "NAME=checkpoint for the PPL column");
  eval_cmd->add_option("--generations", eval_generations, "per-attribute generations (control)");
  eval_cmd->add_option("--model", eval_model, "checkpoint that produced them (control)");
  eval_cmd->add_option("--lexicons", eval_lexicons, "annotator lexicons (control)");
  eval_cmd->add_option("--title", eval_title, "table title");
  eval_cmd->add_flag("--multi-reference", multi_ref, "multi-reference Self-BLEU");
  eval_cmd->add_option("--out-prefix", eval_prefix, "writes PREFIX.txt and PREFIX.json")->required();

  // rerank
  auto* rerank_cmd = app.add_subcommand("rerank", "frame-set candidates reranked by a reverse model");
  std::string rr_model, rr_reverse, rr_corpus, rr_out;
  RerankConfig rr_config;
  std::size_t rr_limit = 0;
  rerank_cmd->add_option("--model", rr_model, "frames checkpoint")->required();
  rerank_cmd->add_option("--reverse", rr_reverse, "reverse checkpoint")->required();
  rerank_cmd->add_option("--corpus", rr_corpus, "stories")->required();
  rerank_cmd->add_option("--lambda", rr_config.lambda, "reverse-score weight");
  rerank_cmd->add_option("--k", rr_config.k, "outputs kept per context");
  rerank_cmd->add_option("--limit", rr_limit, "only the first N stories");
  rerank_cmd->add_option("--out", rr_out, "generation JSONL")->required();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP suggestion service");
  ServicePaths paths;
  std::string host = "127.0.0.1";
  int port = 8080;
  serve_cmd->add_option("--model", paths.model, "generation checkpoint")->required();
  serve_cmd->add_option("--reverse", paths.reverse, "reverse checkpoint (auto-rerank)");
  serve_cmd->add_option("--predictor", paths.predictor, "frame predictor (auto-predict)");
  serve_cmd->add_option("--lexicons", paths.lexicons, "lexicons (auto-predict)");
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "port");

  CLI11_PARSE(app, argc, argv);

  try {
    const KeyValueConfig cfg = load_config(config_path);
    TrainConfig train_config = train_config_from(cfg);
    if (app.count("--seed")) train_config.seed = seed;
    ModelConfig model_config = model_config_from(cfg);
    const FramePredictorConfig fp_config = frame_predictor_config_from(cfg);
    const std::size_t config_vocab_size = cfg.get("vocab_size", vocab_size);
    if (!train_cmd->count("--vocab-size")) vocab_size = config_vocab_size;
    auto on_epoch = [](const EpochStats& s) {
      std::fprintf(stderr, "epoch %zu  train_nll %.4f  dev_ppl %.4f  (%.1fs)\n", s.epoch, s.train_loss,
                   s.dev_perplexity, s.seconds);
    };

    if (*synth) {
      SyntheticOptions opts;
      opts.seed = synth_seed;
      opts.stories = synth_stories;
      save_bundle(synth_out, make_synthetic_corpus(opts));
      std::cout << "wrote " << synth_out << '\n';
    } else if (*annotate) {
      const Lexicons lex = load_lexicons(annotate_lexicons);
      Sidecar out;
      const auto stories = load_corpora(annotate_corpora);
      for (const Story& s : stories) out.put(annotate_story(s, lex));
      save_sidecar(annotate_out, out);
      std::cout << "annotated " << stories.size() << " stories -> " << annotate_out << '\n';
      if (!annotate_check.empty()) {
        const Sidecar gold = load_sidecar(annotate_check);
        std::size_t agree = 0;
        for (const Story& s : stories) {
          const Annotation* g = gold.find(s.id);
          Annotation mine = out.at(s.id);
          if (g) {
            mine.source = g->source;
            mine.cluster = g->cluster;
            agree += mine == *g;
          }
        }
        std::cout << "agreement with " << annotate_check << ": " << agree << "/" << stories.size() << '\n';
      }
    } else if (*cluster) {
      Sidecar sidecar = load_sidecar(cluster_sidecar);
      const auto train = load_corpus(cluster_train);
      const auto extra = load_corpora(cluster_label);
      const EmbeddingTable emb = load_glove(cluster_embeddings);
      ClusterModel model = cluster_continuations(train, {&train, &extra}, sidecar, emb, cluster_k, seed);
      nlohmann::json j = to_json(model);
      write_json_file(cluster_out, j);
      save_sidecar(cluster_sidecar_out.empty() ? cluster_sidecar : cluster_sidecar_out, sidecar);
      std::cout << "k-means k=" << cluster_k << " iterations=" << model.iterations
                << " objective=" << model.objective_history.back() << '\n';
    } else if (*pca_cmd) {
      const auto pca = fit_predicate_pca(load_corpus(pca_train), load_sidecar(pca_sidecar),
                                         load_glove(pca_embeddings), pca_k);
      write_json_file(pca_out, to_json(pca));
      std::cout << "PCA " << pca.input_dim() << " -> " << pca.output_dim() << '\n';
    } else if (*train_cmd) {
      const AttributeType type = parse_attribute_type(attribute);
      CorpusBundle data;
      data.train = load_corpus(train_path);
      data.dev = load_corpus(dev_path);
      if (!sidecar_path.empty()) data.sidecar = load_sidecar(sidecar_path);
      EmbeddingTable emb;
      PcaProjection pca;
      ClusterModel clusters;
      AttributeResources res;
      if (!embeddings_path.empty()) res.embeddings = &(emb = load_glove(embeddings_path));
      if (!pca_path.empty()) res.pca = &(pca = pca_from_json(read_json_file(pca_path)));
      if (!clusters_path.empty()) res.clusters = &(clusters = cluster_model_from_json(read_json_file(clusters_path)));
      warn_unused(cfg);
      auto model = build_model<double>(type, data, model_config, res, vocab_size);
      const auto train_set = make_examples(data.train, data.sidecar, model.vocab(), model.embedder());
      const auto dev_set = make_examples(data.dev, data.sidecar, model.vocab(), model.embedder());
      TrainReport report;
      if (precision == 32) {
        auto narrow = model.cast<float>();
        report = train(narrow, train_set, dev_set, train_config, on_epoch);
        model = narrow.cast<double>();
      } else {
        report = train(model, train_set, dev_set, train_config, on_epoch);
      }
      save_model(model_out, model, report.best_dev_perplexity,
                 {{"train_report", to_json(report)}, {"precision", precision}});
      std::cout << "best dev ppl " << report.best_dev_perplexity << " at epoch " << report.best_epoch
                << " -> " << model_out << '\n';
    } else if (*reverse_cmd) {
      warn_unused(cfg);
      CorpusBundle data;
      data.train = load_corpus(rev_train);
      data.dev = load_corpus(rev_dev);
      auto model = build_model<double>(AttributeType::kNone, data, model_config, {});
      const auto report = train(model, make_reverse_examples(data.train, model.vocab()),
                                make_reverse_examples(data.dev, model.vocab()), train_config, on_epoch);
      save_model(rev_out, model, report.best_dev_perplexity, {{"direction", "reverse"}});
      std::cout << "reverse model best dev ppl " << report.best_dev_perplexity << " -> " << rev_out << '\n';
    } else if (*fp_cmd) {
      warn_unused(cfg);
      const Sidecar sidecar = load_sidecar(fp_sidecar);
      const auto train_stories = load_corpus(fp_train);
      const auto dev_stories = load_corpus(fp_dev);
      const FrameInventory inventory = FrameInventory::build(annotations_of(train_stories, sidecar));
      FramePredictor predictor(fp_config, inventory);
      const auto report = train_frame_predictor(predictor, make_frame_examples(train_stories, sidecar, inventory),
                                                make_frame_examples(dev_stories, sidecar, inventory));
      save_frame_predictor(fp_out, predictor, report.best_dev_mse);
      std::cout << "frame predictor best dev MSE " << report.best_dev_mse << " -> " << fp_out << '\n';
    } else if (*gen_cmd) {
      const auto loaded = load_model(gen_model);
      const auto& model = loaded.model;
      auto stories = load_corpus(gen_corpus);
      if (gen_limit > 0 && stories.size() > gen_limit) stories.resize(gen_limit);
      const Sidecar sidecar = gen_sidecar.empty() ? Sidecar() : load_sidecar(gen_sidecar);
      std::optional<FramePredictor> predictor;
      std::optional<Lexicons> lex;
      if (gen_mode == "predict") {
        if (gen_predictor.empty() || gen_lexicons.empty()) {
          throw ContractError("predict mode needs --predictor and --lexicons");
        }
        predictor = load_frame_predictor(gen_predictor);
        lex = load_lexicons(gen_lexicons);
      }
      std::vector<AttributeValue> fixed;
      if (gen_mode == "per-attribute") fixed = model.embedder().enumerate();
      for (const auto& v : gen_values) fixed.push_back(model.embedder().parse(nlohmann::json::parse(v)));
      GenerationList out;
      std::uint64_t sample_seed = seed;
      for (const Story& s : stories) {
        const auto source = model.vocab().encode_context(s.context);
        auto emit = [&](const AttributeValue& v, std::size_t n) {
          if (temperature > 0.0) {
            for (const auto& h : temperature_sample(model, source, v, temperature, n, sample_seed++)) {
              out.push_back(make_generation(model, s.id, "TS", v, h));
            }
          } else {
            const auto hyps = beam_search(model, source, v, std::max(beam, n));
            for (std::size_t i = 0; i < n && i < hyps.size(); ++i) {
              out.push_back(make_generation(model, s.id, beam == 1 ? "greedy" : "BS", v, hyps[i]));
            }
          }
        };
        if (gen_mode == "oracle") {
          emit(oracle_value(model, sidecar, s), gen_n);
        } else if (gen_mode == "predict") {
          const auto ids = predict_topk_frames(*predictor, context_frame_vectors(s, *lex, predictor->inventory()), gen_n);
          for (int id : ids) {
            const std::string name = predictor->inventory().name(id);
            emit(AttributeValue::of_frames({model.embedder().inventory.id(name)}), 1);
          }
        } else {
          for (const auto& v : fixed) {
            const std::size_t before = out.size();
            emit(v, gen_n);
            for (std::size_t i = before; i < out.size(); ++i) out[i].generator = "attr";
          }
        }
      }
      save_generations(gen_out, out);
      std::cout << "wrote " << out.size() << " generations -> " << gen_out << '\n';
    } else if (*eval_cmd) {
      if (eval_kind == "control") {
        if (eval_generations.empty() || eval_model.empty() || eval_lexicons.empty()) {
          throw ContractError("control reports need --generations, --model and --lexicons");
        }
        const auto loaded = load_model(eval_model);
        const Lexicons lex = load_lexicons(eval_lexicons);
        const Evaluator evaluator{loaded.model.embedder().type, &lex, &loaded.model.embedder()};
        const MatchTable table = match_table_from_generations(evaluator, load_generations(eval_generations));
        const std::string title = eval_title.empty() ? to_string(evaluator.type) + " match percentages" : eval_title;
        const std::string text = format_match_table(table, title);
        write_text(eval_prefix + ".txt", text, false);
        write_json_file(eval_prefix + ".json", to_json(table));
        if (evaluator.type == AttributeType::kLength30) write_text(eval_prefix + ".csv", length_plot_csv(table), false);
        std::cout << text;
      } else {
        if (eval_corpus.empty()) throw ContractError("--corpus is required for metric reports");
        std::map<std::string, Tokens> gold;
        const auto stories = load_corpus(eval_corpus);
        for (const Story& s : stories) gold[s.id] = s.continuation;
        std::map<std::string, double> ppl;
        for (const auto& spec : eval_ppl) {
          const auto [name, path] = split_named(spec);
          const auto loaded = load_model(path);
          const Sidecar sidecar = eval_sidecar.empty() ? Sidecar() : load_sidecar(eval_sidecar);
          ppl[name] = perplexity(loaded.model, make_examples(stories, sidecar, loaded.model.vocab(),
                                                             loaded.model.embedder()));
        }
        std::vector<SystemScores> rows;
        nlohmann::json j = nlohmann::json::array();
        for (const auto& spec : eval_systems) {
          const auto [name, path] = split_named(spec);
          SystemScores s = score_system(name, load_generations(path), gold, multi_ref);
          if (ppl.count(name)) s.perplexity = ppl[name];
          j.push_back(to_json(s));
          rows.push_back(std::move(s));
        }
        const std::string text = eval_kind == "oracle"
                                     ? format_oracle_table(rows, eval_title.empty() ? "Oracle attributes" : eval_title)
                                     : format_diversity_table(rows, eval_title.empty() ? "Diverse lists" : eval_title);
        write_text(eval_prefix + ".txt", text, false);
        write_json_file(eval_prefix + ".json", j);
        std::cout << text;
      }
    } else if (*rerank_cmd) {
      const auto model = load_model(rr_model);
      const auto reverse = load_model(rr_reverse);
      auto stories = load_corpus(rr_corpus);
      if (rr_limit > 0 && stories.size() > rr_limit) stories.resize(rr_limit);
      GenerationList out;
      for (const Story& s : stories) {
        auto list = rerank_frame_sets(model.model, reverse.model, s.id, s.context, rr_config);
        out.insert(out.end(), list.begin(), list.end());
      }
      save_generations(rr_out, out);
      std::cout << "wrote " << out.size() << " reranked generations -> " << rr_out << '\n';
    } else if (*serve_cmd) {
      auto registry = std::make_shared<ModelRegistry>(load_service_models(paths));
      httplib::Server server;
      install_routes(server, registry, [paths] { return load_service_models(paths); });
      std::cout << "serving " << paths.model << " on http://" << host << ":" << port << std::endl;
      if (!server.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << '\n';
        return 1;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
