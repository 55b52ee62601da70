#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spellgcn/checkpoint.hpp"
#include "spellgcn/corpus.hpp"
#include "spellgcn/corruption.hpp"
#include "spellgcn/error.hpp"
#include "spellgcn/graph.hpp"
#include "spellgcn/metrics.hpp"
#include "spellgcn/model.hpp"
#include "spellgcn/trainer.hpp"
#include "spellgcn/utf8.hpp"

namespace {

using namespace spellgcn;

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw DataError("cannot open output file: " + path);
  return file;
}

struct GlobalOpts {
  std::uint64_t seed = 1;
  bool fp64 = false;
  bool quiet = false;
};

void add_global_flags(CLI::App& app, GlobalOpts& g) {
  app.add_option("--seed", g.seed, "Seed for all derived random streams");
  app.add_flag("--fp64", g.fp64, "Use 64-bit arithmetic");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");
}

// ---- graph commands -------------------------------------------------------

void run_graph_stats(const std::string& cs_path, std::ostream& out) {
  std::ifstream in(cs_path, std::ios::binary);
  if (!in) throw DataError("cannot open confusion set: " + cs_path);
  const ConfusionSet cs = parse_confusion_set(in);
  const auto graphs = build_graphs<double>(cs);
  const GraphStats s = graph_stats(cs, graphs);
  out << "nodes\t" << s.n_nodes << "\n";
  out << "entries\t" << s.n_entries << "\n";
  for (std::size_t c = 0; c < s.category_counts.size(); ++c) {
    out << "category_" << (c + 1) << "\t" << s.category_counts[c] << "\n";
  }
  out << "pron_characters\t" << s.pron.characters << "\n";
  out << "pron_edges_undirected\t" << s.pron.undirected_edges << "\n";
  out << "pron_edges_directed\t" << s.pron.directed_edges << "\n";
  out << "shape_characters\t" << s.shape.characters << "\n";
  out << "shape_edges_undirected\t" << s.shape.undirected_edges << "\n";
  out << "shape_edges_directed\t" << s.shape.directed_edges << "\n";
}

void run_build_graph(const std::string& cs_path, std::ostream& out) {
  std::ifstream in(cs_path, std::ios::binary);
  if (!in) throw DataError("cannot open confusion set: " + cs_path);
  const ConfusionSet cs = parse_confusion_set(in);
  const auto graphs = build_graphs<double>(cs);
  auto dump = [&](const char* name, const Csr<double>& a) {
    for (std::size_t i = 0; i < a.n_rows; ++i) {
      for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        out << name << '\t' << utf8_encode(std::u32string(1, cs.chars()[i])) << '\t'
            << utf8_encode(std::u32string(1, cs.chars()[a.col[k]])) << '\t' << i << '\t'
            << a.col[k] << '\t' << fmt9(a.val[k]) << "\n";
      }
    }
  };
  out << "graph\tchar_i\tchar_j\ti\tj\tweight\n";
  dump("pron", graphs.pron.normalized);
  dump("shape", graphs.shape.normalized);
}

// ---- train ----------------------------------------------------------------

struct TrainOpts {
  std::string confusion_path;
  std::string train_path;
  std::string dev_path;
  std::string checkpoint_path;
  std::string report_path;
  std::size_t epochs = 6;
  std::size_t batch_size = 32;
  double lr = 5e-5;
  double beta = 3.0;
  std::size_t layers = 2;
  std::string mode = "attention";
  std::size_t dim = 32;
  std::size_t heads = 4;
  std::size_t max_len = 64;
  double weight_decay = 0.01;
  double grad_clip = 0;
  bool no_gcn = false;
};

void write_train_report(const TrainReport& rep, std::ostream& out) {
  out << "epochs=" << rep.epochs.size() << "\n";
  for (std::size_t e = 0; e < rep.epochs.size(); ++e) {
    const EpochRecord& r = rep.epochs[e];
    out << "epoch" << e << "_loss=" << fmt9(r.mean_loss) << "\n";
    out << "epoch" << e << "_clamped=" << r.clamped << "\n";
    if (r.has_dev) {
      const auto& d = r.dev;
      out << "epoch" << e << "_dev_char_det_f=" << fmt9(d.chars.detection.f1) << "\n";
      out << "epoch" << e << "_dev_char_corr_f=" << fmt9(d.chars.correction.f1) << "\n";
      out << "epoch" << e << "_dev_sent_det_f=" << fmt9(d.sentences.detection.f1) << "\n";
      out << "epoch" << e << "_dev_sent_corr_f=" << fmt9(d.sentences.correction.f1) << "\n";
      out << "epoch" << e << "_dev_fpr=" << fmt9(d.sentences.fpr) << "\n";
    }
  }
}

template <class Real>
void run_train(const TrainOpts& o, const GlobalOpts& g) {
  std::ifstream cs_in(o.confusion_path, std::ios::binary);
  if (!cs_in) throw DataError("cannot open confusion set: " + o.confusion_path);
  ConfusionSet cs = parse_confusion_set(cs_in);
  auto train_corpus = load_parallel_corpus(o.train_path);
  std::vector<Sample> dev_corpus;
  if (!o.dev_path.empty()) dev_corpus = load_parallel_corpus(o.dev_path);

  std::vector<std::u32string> texts;
  for (const auto& s : train_corpus) {
    texts.push_back(s.source);
    texts.push_back(s.target);
  }
  for (const auto& s : dev_corpus) {
    texts.push_back(s.source);
    texts.push_back(s.target);
  }

  ModelConfig mc;
  mc.dim = o.dim;
  mc.n_layers = 2;
  mc.n_heads = o.heads;
  mc.max_len = o.max_len;
  mc.gcn_depth = o.layers;
  mc.beta = o.beta;
  mc.mode = parse_combine_mode(o.mode);
  mc.use_gcn = !o.no_gcn;
  mc.seed = g.seed;
  CscModel<Real> model(cs, texts, mc);

  TrainConfig tc;
  tc.learning_rate = o.lr;
  tc.batch_size = o.batch_size;
  tc.epochs = o.epochs;
  tc.weight_decay = o.weight_decay;
  tc.seed = g.seed;
  if (o.grad_clip > 0) tc.grad_clip = o.grad_clip;

  const TrainReport rep = train(model, train_corpus, dev_corpus, tc);
  if (!g.quiet) {
    for (std::size_t e = 0; e < rep.epochs.size(); ++e) {
      std::cerr << "epoch " << e << " loss " << rep.epochs[e].mean_loss;
      if (rep.epochs[e].has_dev) {
        std::cerr << " dev_sent_corr_f " << rep.epochs[e].dev.sentences.correction.f1;
      }
      std::cerr << "\n";
    }
    std::cerr << "trained in " << rep.wall_seconds << " s\n";
  }
  if (!o.checkpoint_path.empty()) save_checkpoint(model, o.checkpoint_path);
  if (!o.report_path.empty()) {
    std::ofstream rf(o.report_path, std::ios::binary);
    if (!rf) throw DataError("cannot open report file: " + o.report_path);
    write_train_report(rep, rf);
  }
}

// ---- checkpoint-consuming commands ----------------------------------------

template <class Real>
void run_correct(const std::string& ckpt_path) {
  auto model = load_checkpoint<Real>(ckpt_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(std::cin, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::u32string text;
    try {
      text = utf8_decode(line);
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
    if (text.size() > model.config().max_len) {
      throw LengthError("input line " + std::to_string(line_no) + " exceeds max_len " +
                        std::to_string(model.config().max_len));
    }
    std::cout << utf8_encode(model.correct(text)) << "\n";
  }
}

void write_eval_tsv(const EvalReport& r, std::ostream& out) {
  auto row = [&](const std::string& k, double v) { out << k << '\t' << fmt9(v) << "\n"; };
  auto rowc = [&](const std::string& k, std::size_t v) { out << k << '\t' << v << "\n"; };
  row("char_detection_precision", r.chars.detection.precision);
  row("char_detection_recall", r.chars.detection.recall);
  row("char_detection_f1", r.chars.detection.f1);
  row("char_correction_precision", r.chars.correction.precision);
  row("char_correction_recall", r.chars.correction.recall);
  row("char_correction_f1", r.chars.correction.f1);
  row("sentence_detection_precision", r.sentences.detection.precision);
  row("sentence_detection_recall", r.sentences.detection.recall);
  row("sentence_detection_f1", r.sentences.detection.f1);
  row("sentence_correction_precision", r.sentences.correction.precision);
  row("sentence_correction_recall", r.sentences.correction.recall);
  row("sentence_correction_f1", r.sentences.correction.f1);
  row("false_positive_rate", r.sentences.fpr);
  rowc("char_flagged", r.chars.counts.flagged);
  rowc("char_gold", r.chars.counts.gold);
  rowc("char_detection_hits", r.chars.counts.det_hits);
  rowc("char_correction_hits", r.chars.counts.corr_hits);
  rowc("sentences_total", r.sentences.counts.total);
  rowc("sentences_flagged", r.sentences.counts.flagged);
  rowc("sentences_with_error", r.sentences.counts.with_error);
  rowc("sentence_detection_hits", r.sentences.counts.det_hits);
  rowc("sentence_correction_hits", r.sentences.counts.corr_hits);
  rowc("sentences_clean", r.sentences.counts.clean);
  rowc("sentences_clean_flagged", r.sentences.counts.clean_flagged);
}

void write_eval_flat(const EvalReport& r, std::ostream& out) {
  std::ostringstream tsv;
  write_eval_tsv(r, tsv);
  std::istringstream lines(tsv.str());
  std::string line;
  while (std::getline(lines, line)) {
    const auto tab = line.find('\t');
    out << line.substr(0, tab) << '=' << line.substr(tab + 1) << "\n";
  }
}

template <class Real>
void run_eval(const std::string& ckpt_path, const std::string& corpus_path,
              const std::string& out_path, const std::string& flat_path) {
  auto model = load_checkpoint<Real>(ckpt_path);
  const auto corpus = load_parallel_corpus(corpus_path);
  const EvalReport rep = model.evaluate(corpus);
  std::ofstream out_file;
  write_eval_tsv(rep, open_out(out_file, out_path));
  if (!flat_path.empty()) {
    std::ofstream ff(flat_path, std::ios::binary);
    if (!ff) throw DataError("cannot open flat report file: " + flat_path);
    write_eval_flat(rep, ff);
  }
}

template <class Real>
void run_export_embeddings(const std::string& ckpt_path, const std::string& out_path) {
  auto model = load_checkpoint<Real>(ckpt_path);
  const Matrix<Real> w = model.classifier();
  std::ofstream out_file;
  std::ostream& out = open_out(out_file, out_path);
  const std::size_t d = model.config().dim;
  out << "char";
  for (std::size_t j = 0; j < d; ++j) out << ",dim" << j;
  out << "\n";
  for (char32_t c : model.confusion().chars()) {
    const std::size_t id = model.vocab().id_of(c);
    out << utf8_encode(std::u32string(1, c));
    for (std::size_t j = 0; j < d; ++j) out << ',' << fmt9(static_cast<double>(w(id, j)));
    out << "\n";
  }
}

// ---- corrupt ---------------------------------------------------------------

MaskPolicy parse_policy(const std::string& text, double rate) {
  MaskPolicy p;
  double vals[5];
  std::istringstream in(text);
  std::string field;
  for (int i = 0; i < 5; ++i) {
    if (!std::getline(in, field, ',')) throw ConfigError("--policy needs 5 comma-separated values");
    try {
      vals[i] = std::stod(field);
    } catch (const std::exception&) {
      throw ConfigError("--policy: bad number '" + field + "'");
    }
  }
  if (std::getline(in, field, ',')) throw ConfigError("--policy needs exactly 5 values");
  p.p_mask = vals[0];
  p.p_random_vocab = vals[1];
  p.p_unchanged = vals[2];
  p.p_confusion_similar = vals[3];
  p.p_confusion_random = vals[4];
  p.selection_rate = rate;
  p.validate();
  return p;
}

void run_corrupt(const std::string& cs_path, const MaskPolicy& policy, std::uint64_t seed) {
  std::ifstream cs_in(cs_path, std::ios::binary);
  if (!cs_in) throw DataError("cannot open confusion set: " + cs_path);
  const ConfusionSet cs = parse_confusion_set(cs_in);
  const std::vector<char32_t>& pool = cs.chars();

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(std::cin, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::u32string text;
    try {
      text = utf8_decode(line);
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
    Rng rng = Rng::indexed(seed, line_no - 1);
    const auto rec = detail::corrupt_with_rng(text, policy, cs, rng, pool);
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "synthetic-%06zu", line_no);
    std::cout << idbuf << '\t' << utf8_encode(rec.corrupted) << '\t'
              << utf8_encode(rec.original) << "\n";
  }
}

// ---- dispatch ---------------------------------------------------------------

template <class Fn>
void with_checkpoint_mode(const std::string& ckpt_path, bool fp64_flag, Fn&& fn) {
  // The stored arithmetic mode wins; --fp64 only matters for files that
  // somehow lack it (never produced by this tool).
  std::string mode;
  try {
    mode = checkpoint_real_mode(ckpt_path);
  } catch (const Error&) {
    mode = fp64_flag ? "float64" : "float32";
  }
  if (mode == "float64") {
    fn(double{});
  } else {
    fn(float{});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-augmented Chinese spelling correction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOpts g;
  add_global_flags(app, g);

  std::string cs_path;
  std::string out_path;

  auto* cmd_stats = app.add_subcommand("graph-stats", "Print similarity-graph statistics as TSV");
  cmd_stats->add_option("--confusion-set", cs_path, "Confusion-set TSV path")->required();

  auto* cmd_build = app.add_subcommand("build-graph", "Dump normalized adjacencies as TSV");
  cmd_build->add_option("--confusion-set", cs_path, "Confusion-set TSV path")->required();
  cmd_build->add_option("--out", out_path, "Output path (default: stdout)");

  TrainOpts t;
  auto* cmd_train = app.add_subcommand("train", "Train a correction model");
  cmd_train->add_option("--confusion-set", t.confusion_path, "Confusion-set TSV path")->required();
  cmd_train->add_option("--train", t.train_path, "Training corpus TSV")->required();
  cmd_train->add_option("--dev", t.dev_path, "Held-out corpus TSV, scored each epoch");
  cmd_train->add_option("--epochs", t.epochs, "Training epochs");
  cmd_train->add_option("--batch-size", t.batch_size, "Batch size");
  cmd_train->add_option("--lr", t.lr, "Learning rate");
  cmd_train->add_option("--beta", t.beta, "Attention temperature");
  cmd_train->add_option("--layers", t.layers, "Graph-convolution depth");
  cmd_train->add_option("--mode", t.mode, "Graph combination: attention, mean or sum");
  cmd_train->add_option("--checkpoint", t.checkpoint_path, "Checkpoint output path");
  cmd_train->add_option("--dim", t.dim, "Representation width");
  cmd_train->add_option("--heads", t.heads, "Attention heads in the extractor");
  cmd_train->add_option("--max-len", t.max_len, "Maximum sentence length");
  cmd_train->add_option("--weight-decay", t.weight_decay, "Decoupled weight decay");
  cmd_train->add_option("--grad-clip", t.grad_clip, "Global-norm gradient clip (0 = off)");
  cmd_train->add_flag("--no-gcn", t.no_gcn, "Ablation: plain softmax over embedding rows");
  cmd_train->add_option("--report", t.report_path, "Write key=value training report here");

  std::string ckpt_path;
  auto* cmd_correct = app.add_subcommand("correct", "Correct sentences from stdin to stdout");
  cmd_correct->add_option("--checkpoint", ckpt_path, "Checkpoint path")->required();

  std::string corpus_path;
  std::string flat_path;
  auto* cmd_eval = app.add_subcommand("eval", "Score a checkpoint on an aligned corpus");
  cmd_eval->add_option("--checkpoint", ckpt_path, "Checkpoint path")->required();
  cmd_eval->add_option("--corpus", corpus_path, "Corpus TSV `id\\tsource\\ttarget`")->required();
  cmd_eval->add_option("--out", out_path, "Report TSV path (default: stdout)");
  cmd_eval->add_option("--flat", flat_path, "Also write a key=value flat report here");

  std::string policy_text = "0.8,0.066,0.067,0.067,0.0";
  double rate = 0.15;
  auto* cmd_corrupt = app.add_subcommand("corrupt", "Corrupt clean stdin lines into corpus TSV");
  cmd_corrupt->add_option("--confusion-set", cs_path, "Confusion-set TSV path")->required();
  cmd_corrupt->add_option("--policy", policy_text, "Five comma-separated action probabilities");
  cmd_corrupt->add_option("--rate", rate, "Per-position selection rate");

  auto* cmd_export = app.add_subcommand("export-embeddings",
                                        "Write classifier rows of confusion characters as CSV");
  cmd_export->add_option("--checkpoint", ckpt_path, "Checkpoint path")->required();
  cmd_export->add_option("--out", out_path, "CSV output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return 2;
  }

  try {
    if (*cmd_stats) {
      run_graph_stats(cs_path, std::cout);
    } else if (*cmd_build) {
      std::ofstream out_file;
      run_build_graph(cs_path, open_out(out_file, out_path));
    } else if (*cmd_train) {
      if (g.fp64) {
        run_train<double>(t, g);
      } else {
        run_train<float>(t, g);
      }
    } else if (*cmd_correct) {
      with_checkpoint_mode(ckpt_path, g.fp64, [&](auto tag) {
        run_correct<decltype(tag)>(ckpt_path);
      });
    } else if (*cmd_eval) {
      with_checkpoint_mode(ckpt_path, g.fp64, [&](auto tag) {
        run_eval<decltype(tag)>(ckpt_path, corpus_path, out_path, flat_path);
      });
    } else if (*cmd_corrupt) {
      run_corrupt(cs_path, parse_policy(policy_text, rate), g.seed);
    } else if (*cmd_export) {
      with_checkpoint_mode(ckpt_path, g.fp64, [&](auto tag) {
        run_export_embeddings<decltype(tag)>(ckpt_path, out_path);
      });
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
