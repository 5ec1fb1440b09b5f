// discorel: command-line front end for distillation, agreement, bias
// diagnostics, classifier training and the annotation server.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "discorel/discorel.hpp"
#include "discorel/http_api.hpp"

using namespace discorel;

namespace {

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt(const std::optional<double>& v, int digits = 3) { return v ? fmt(*v, digits) : "-"; }

MinorityRule make_rule(int min_votes, double min_fraction) {
  MinorityRule r;
  r.min_votes = min_votes;
  if (min_fraction > 0) r.min_fraction = min_fraction;
  return r;
}

Corpus load_corpus(const SenseVocabulary& vocab, const std::string& items, const std::vector<std::string>& votes) {
  std::vector<LoadWarning> warnings;
  auto c = Corpus::load_files(items, votes, vocab, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: items line " << w.line << ": " << w.message << "\n";
  return c;
}

std::vector<std::string> label_names(const SenseVocabulary& vocab, const LabelSet& s) {
  std::vector<std::string> out;
  for (auto l : s) out.push_back(vocab.at(l).id);
  return out;
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    text::write_file(path, content);
    std::cerr << "wrote " << path << "\n";
  }
}

// distill ------------------------------------------------------------------

struct DistillArgs {
  std::string items, out;
  std::vector<std::string> votes;
  std::string method = "dc";
  int min_votes = 2;
  double min_fraction = 0;
};

int run_distill(const DistillArgs& a) {
  const auto& vocab = SenseVocabulary::pdtb3();
  auto corpus = load_corpus(vocab, a.items, a.votes);
  auto m = parse_method(a.method);
  auto rule = make_rule(a.min_votes, a.min_fraction);
  std::string out;
  std::size_t n = 0, all_minority = 0;
  for (const auto& item : corpus.items()) {
    const auto* vs = corpus.votes_for(item.item_id, m);
    if (!vs || vs->total() == 0) continue;
    ++n;
    ordered_json rec;
    rec["item_id"] = item.item_id;
    rec["genre"] = item.genre;
    rec["method"] = std::string(to_string(m));
    rec["n_votes"] = vs->total();
    ordered_json counts = ordered_json::object();
    for (auto [l, c] : vs->counts()) counts[vocab.at(l).id] = c;
    rec["counts"] = counts;
    auto sub = try_filter_minority(*vs, rule);
    if (!sub) {
      ++all_minority;
      rec["all_minority"] = true;
      rec["sublabels"] = ordered_json::array();
    } else {
      rec["all_minority"] = false;
      rec["sublabels"] = label_names(vocab, sub->labels);
      rec["removed_mass"] = sub->removed_mass;
      auto dist = filtered_distribution(*vs, vocab.distribution_size(), rule);
      ordered_json d = ordered_json::object();
      for (std::size_t i = 0; i < dist.probs.size(); ++i)
        if (dist.probs[i] > 0) d[vocab.labels()[i].id] = dist.probs[i];
      rec["distribution"] = d;
    }
    out += rec.dump() + "\n";
  }
  write_or_print(a.out, out);
  std::cerr << n << " items distilled, " << all_minority << " all-minority\n";
  return 0;
}

// agree --------------------------------------------------------------------

struct AgreeArgs {
  std::string items, out;
  std::vector<std::string> votes_a, votes_b;
  std::string method_a = "dc", method_b = "qa";
  bool reference = false;
  bool by_genre = false;
  std::uint64_t seed = KappaConfig{}.rng_seed;
  std::size_t bootstrap = KappaConfig{}.bootstrap_samples;
  unsigned threads = 0;
  int min_votes = 2;
  double min_fraction = 0;
  std::string log_base = "2";
};

ordered_json row_json(const AgreementRow& r) {
  ordered_json j;
  j["scope"] = r.scope;
  j["n_items"] = r.n_items;
  j["n_excluded"] = r.n_excluded;
  j["sublabels_per_item_a"] = r.sublabels_a;
  j["sublabels_per_item_b"] = r.sublabels_b;
  j["full_agreement"] = r.full_rate;
  j["partial_agreement"] = r.partial_rate;
  if (r.kappa) {
    j["kappa"] = r.kappa->kappa;
    j["observed"] = r.kappa->observed;
    j["expected"] = r.kappa->expected;
    j["expected_stderr"] = r.kappa->expected_stderr;
  } else {
    j["kappa"] = nullptr;
  }
  j["jsd"] = r.mean_jsd ? ordered_json(*r.mean_jsd) : ordered_json(nullptr);
  j["jsd_flat"] = r.mean_jsd_flat ? ordered_json(*r.mean_jsd_flat) : ordered_json(nullptr);
  return j;
}

void print_report(const AgreementReport& rep) {
  std::printf("%s vs %s\n", rep.side_a.c_str(), rep.side_b.c_str());
  std::printf("%-12s %6s %5s %7s %7s %7s %7s %7s %7s %8s\n", "scope", "n", "excl", "sub/a", "sub/b", "full",
              "partial", "kappa", "jsd", "jsd_flat");
  auto line = [](const AgreementRow& r) {
    std::printf("%-12s %6zu %5zu %7s %7s %7s %7s %7s %7s %8s\n", r.scope.c_str(), r.n_items, r.n_excluded,
                fmt(r.sublabels_a, 2).c_str(), fmt(r.sublabels_b, 2).c_str(), fmt(r.full_rate).c_str(),
                fmt(r.partial_rate).c_str(),
                r.kappa ? fmt(r.kappa->kappa).c_str() : "-", fmt(r.mean_jsd).c_str(), fmt(r.mean_jsd_flat).c_str());
  };
  for (const auto& r : rep.per_genre) line(r);
  line(rep.overall);
}

int run_agree(const AgreeArgs& a) {
  const auto& vocab = SenseVocabulary::pdtb3();
  auto votes = a.votes_a;
  votes.insert(votes.end(), a.votes_b.begin(), a.votes_b.end());
  auto corpus = load_corpus(vocab, a.items, votes);
  AgreementOptions opt;
  opt.kappa.bootstrap_samples = a.bootstrap;
  opt.kappa.rng_seed = a.seed;
  opt.kappa.threads = a.threads;
  opt.minority = make_rule(a.min_votes, a.min_fraction);
  opt.by_genre = a.by_genre;
  if (a.log_base == "e" || a.log_base == "natural") opt.log_base = LogBase::natural;
  else if (a.log_base != "2") throw Error(ErrorCode::invalid_argument, "--log-base must be 2 or e");

  ordered_json records;
  records["seed"] = a.seed;
  records["bootstrap"] = a.bootstrap;
  records["min_votes"] = a.min_votes;
  records["log_base"] = a.log_base;
  records["reports"] = ordered_json::array();
  auto add = [&](const AgreementReport& rep) {
    print_report(rep);
    std::printf("\n");
    ordered_json r;
    r["side_a"] = rep.side_a;
    r["side_b"] = rep.side_b;
    r["overall"] = row_json(rep.overall);
    r["per_genre"] = ordered_json::array();
    for (const auto& g : rep.per_genre) r["per_genre"].push_back(row_json(g));
    records["reports"].push_back(r);
  };
  auto ma = parse_method(a.method_a), mb = parse_method(a.method_b);
  if (a.reference) {
    if (corpus.has_method(ma)) add(compare_with_reference(corpus, ma, opt));
    if (mb != ma && corpus.has_method(mb)) add(compare_with_reference(corpus, mb, opt));
  } else {
    add(compare_methods(corpus, ma, mb, opt));
  }
  if (!a.out.empty()) {
    text::write_file(a.out, records.dump(2) + "\n");
    std::cerr << "wrote " << a.out << "\n";
  }
  return 0;
}

// entropy ------------------------------------------------------------------

struct EntropyArgs {
  std::string items, out;
  std::vector<std::string> votes;
  std::string method = "dc";
  int min_votes = 2;
};

int run_entropy(const EntropyArgs& a) {
  const auto& vocab = SenseVocabulary::pdtb3();
  auto corpus = load_corpus(vocab, a.items, a.votes);
  auto m = parse_method(a.method);
  ordered_json out;
  out["method"] = a.method;
  out["entropy_base"] = vocab.entropy_base();
  out["genres"] = ordered_json::array();
  std::printf("%-12s %6s %8s\n", "genre", "n", "entropy");
  for (const auto& g : entropy_by_genre(corpus, m)) {
    std::printf("%-12s %6zu %8s\n", g.genre.c_str(), g.n_items, fmt(g.mean_entropy).c_str());
    out["genres"].push_back(ordered_json{{"genre", g.genre}, {"n_items", g.n_items}, {"entropy", g.mean_entropy}});
  }
  if (corpus.has_reference()) {
    auto corr = entropy_jsd_correlation(corpus, m, make_rule(a.min_votes, 0));
    std::printf("entropy vs jsd_flat: r = %s over %zu items\n", fmt(corr.r).c_str(), corr.series.size());
    out["pearson_r"] = corr.r ? ordered_json(*corr.r) : ordered_json(nullptr);
    out["series"] = ordered_json::array();
    for (const auto& p : corr.series)
      out["series"].push_back(
          ordered_json{{"item_id", p.item_id}, {"genre", p.genre}, {"entropy", p.entropy}, {"jsd_flat", p.jsd_flat}});
  }
  if (!a.out.empty()) text::write_file(a.out, out.dump(2) + "\n");
  return 0;
}

// bias ---------------------------------------------------------------------

struct BiasArgs {
  std::string items, out, plot_data;
  std::vector<std::string> votes;
  bool confusion = false, fpfn = false, chisq = false, aggregate = false;
  std::vector<std::string> triggers{"result"};
  std::string mode = "replace";
  std::string subset;
  double pool_floor = 5.0;
  int min_votes = 2;
};

int run_bias(BiasArgs a) {
  const auto& vocab = SenseVocabulary::pdtb3();
  auto corpus = load_corpus(vocab, a.items, a.votes);
  auto rule = make_rule(a.min_votes, 0);
  if (!a.confusion && !a.fpfn && !a.chisq && !a.aggregate) a.confusion = a.fpfn = a.chisq = a.aggregate = true;
  ordered_json out;
  std::string plot;

  std::optional<ConfusionMatrix> cm;
  if (a.confusion || a.chisq) cm = confusion_level2(corpus, Method::dc, Method::qa, rule);
  if (a.confusion) {
    std::printf("level-2 confusion (rows dc, columns qa), total %ld\n%-16s", cm->total(), "");
    for (const auto& c : cm->col_labels) std::printf(" %6.6s", c.c_str());
    std::printf("\n");
    for (std::size_t r = 0; r < cm->row_labels.size(); ++r) {
      std::printf("%-16s", cm->row_labels[r].c_str());
      for (auto v : cm->cells[r]) std::printf(" %6ld", v);
      std::printf("\n");
    }
    out["confusion"] = ordered_json{{"rows", cm->row_labels}, {"cols", cm->col_labels}, {"cells", cm->cells}};
    for (std::size_t r = 0; r < cm->row_labels.size(); ++r)
      for (std::size_t c = 0; c < cm->col_labels.size(); ++c)
        plot += ordered_json{{"plot", "heatmap"}, {"row", cm->row_labels[r]}, {"col", cm->col_labels[c]},
                             {"value", cm->cells[r][c]}}
                    .dump() +
                "\n";
  }
  if (a.chisq) {
    auto chi = chi_squared_independence(*cm, a.pool_floor);
    std::printf("chi-squared %.3f, dof %d, p %.3g (%zux%zu after pooling)\n", chi.statistic, chi.dof, chi.p_value,
                chi.rows, chi.cols);
    out["chi_squared"] = ordered_json{{"statistic", chi.statistic}, {"dof", chi.dof}, {"p_value", chi.p_value},
                                     {"rows", chi.rows}, {"cols", chi.cols}, {"pool_floor", a.pool_floor}};
  }
  if (a.fpfn) {
    auto table = error_table(corpus, rule);
    std::printf("%-20s %5s %6s %6s %6s %6s\n", "sense", "ref", "fn_qa", "fn_dc", "fp_qa", "fp_dc");
    out["fp_fn"] = ordered_json::array();
    for (const auto& r : table.rows) {
      const auto& id = vocab.at(r.sense).id;
      std::printf("%-20s %5d %6d %6d %6d %6d\n", id.c_str(), r.ref_count, r.fn_qa, r.fn_dc, r.fp_qa, r.fp_dc);
      out["fp_fn"].push_back(ordered_json{{"sense", id}, {"ref_count", r.ref_count}, {"fn_qa", r.fn_qa},
                                          {"fn_dc", r.fn_dc}, {"fp_qa", r.fp_qa}, {"fp_dc", r.fp_dc}});
      for (const char* series : {"fn_qa", "fn_dc", "fp_qa", "fp_dc"})
        plot += ordered_json{{"plot", "bar"}, {"sense", id}, {"series", series},
                             {"value", out["fp_fn"].back()[series]}}
                    .dump() +
                "\n";
    }
  }
  if (a.aggregate) {
    auto policy = AggregationPolicy::result_to_qa(vocab);
    policy.reannotate_triggers.clear();
    for (const auto& t : a.triggers)
      for (const auto& part : text::split(t, ','))
        if (!text::trim(part).empty()) policy.reannotate_triggers.insert(vocab.parse_id(part));
    policy.mode = parse_aggregation_mode(a.mode);
    std::optional<std::string> subset;
    if (!a.subset.empty()) subset = a.subset;
    auto res = aggregate_bias_aware(corpus, policy, subset, rule);
    std::printf("aggregation (%s, triggers %zu, subset %s): %zu of %zu items re-annotated, %zu lacked a replacement\n",
                a.mode.c_str(), policy.reannotate_triggers.size(), subset ? subset->c_str() : "all",
                res.n_reannotated, res.n_evaluated, res.n_missing_replacement);
    std::printf("  partial agreement with reference %s -> %s, full %s -> %s\n", fmt(res.partial_before).c_str(),
                fmt(res.partial_after).c_str(), fmt(res.full_before).c_str(), fmt(res.full_after).c_str());
    out["aggregation"] = ordered_json{{"mode", a.mode},
                                      {"triggers", label_names(vocab, policy.reannotate_triggers)},
                                      {"subset", subset ? ordered_json(*subset) : ordered_json(nullptr)},
                                      {"n_evaluated", res.n_evaluated},
                                      {"n_reannotated", res.n_reannotated},
                                      {"n_missing_replacement", res.n_missing_replacement},
                                      {"partial_before", res.partial_before},
                                      {"partial_after", res.partial_after},
                                      {"full_before", res.full_before},
                                      {"full_after", res.full_after}};
  }
  if (!a.out.empty()) text::write_file(a.out, out.dump(2) + "\n");
  if (!a.plot_data.empty()) text::write_file(a.plot_data, plot);
  return 0;
}

// train / eval -------------------------------------------------------------

struct TrainArgs {
  std::string items, out;
  std::vector<std::string> votes;
  std::string loss = "soft", mix = "dc";
  classifier::TrainConfig cfg;
  classifier::FeatureConfig features;
  int min_votes = 2;
};

int run_train(TrainArgs a) {
  using namespace classifier;
  const auto& vocab = SenseVocabulary::pdtb3();
  auto corpus = load_corpus(vocab, a.items, a.votes);
  a.cfg.loss = parse_loss(a.loss);
  auto mix = parse_mix(a.mix);
  auto data = build_examples(corpus, mix, a.cfg.loss, a.features, make_rule(a.min_votes, 0));
  TrainReport rep;
  auto model = train(data, a.cfg, a.features, vocab.distribution_size(), &rep);
  for (std::size_t e = 0; e < rep.train_loss.size(); ++e)
    std::printf("epoch %2zu train %.5f dev %s\n", e + 1, rep.train_loss[e],
                e < rep.dev_loss.size() ? fmt(rep.dev_loss[e], 5).c_str() : "-");
  std::printf("best epoch %zu of %zu (%s), %zu train / %zu dev items\n", rep.best_epoch, rep.train_loss.size(),
              rep.stopped_early ? "early stop" : "ran to completion", rep.n_train, rep.n_dev);
  std::ostringstream note;
  note << "loss=" << a.loss << " mix=" << a.mix << " seed=" << a.cfg.rng_seed << " epochs=" << a.cfg.epochs
       << " batch=" << a.cfg.batch_size << " lr=" << a.cfg.learning_rate << " dev=" << rep.n_dev
       << " best_epoch=" << rep.best_epoch;
  text::write_file(a.out, model.serialize(vocab, note.str()));
  std::cerr << "wrote " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string model, test;
  std::vector<std::string> votes;
  std::string mix = "dc";
  int min_votes = 2;
};

int run_eval(const EvalArgs& a) {
  using namespace classifier;
  const auto& vocab = SenseVocabulary::pdtb3();
  auto model = LinearModel::deserialize(text::read_file(a.model));
  auto corpus = load_corpus(vocab, a.test, a.votes);
  auto data = build_examples(corpus, parse_mix(a.mix), LossKind::soft, model.features(), make_rule(a.min_votes, 0));
  auto r = evaluate(model, data);
  std::printf("n %zu  hard_acc %.4f  soft_acc %.4f  jsd %.4f\n", r.n, r.hard_acc, r.soft_acc, r.mean_jsd);
  return 0;
}

// serve --------------------------------------------------------------------

struct ServeArgs {
  std::string items, workers, data_dir = "annotation-data", bank, inventory, ui_dir;
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string admin_token;
  std::uint64_t seed = service::ServiceConfig{}.dispatch_seed;
  std::size_t batch_size = 20;
  long ttl_minutes = 240;
};

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

int run_serve(ServeArgs a) {
  const auto& vocab = SenseVocabulary::pdtb3();
  a.admin_token = env_or("DISCOREL_ADMIN_TOKEN", a.admin_token);
  a.bind = env_or("DISCOREL_BIND", a.bind);
  a.data_dir = env_or("DISCOREL_DATA_DIR", a.data_dir);
  auto items = Corpus::load_files(a.items, std::vector<std::string>{}, vocab);
  auto bank = a.bank.empty() ? dc::ConnectiveBank::seed() : dc::ConnectiveBank::from_file(a.bank, vocab);
  auto inv = a.inventory.empty() ? qa::PrefixInventory::seed() : qa::PrefixInventory::from_file(a.inventory, vocab);
  service::ServiceConfig cfg;
  cfg.data_dir = a.data_dir;
  cfg.admin_token = a.admin_token;
  cfg.dispatch_seed = a.seed;
  cfg.batch_size = a.batch_size;
  cfg.session_ttl = std::chrono::minutes(a.ttl_minutes);
  service::AnnotationService svc(items, service::WorkerRegistry::from_file(a.workers), bank, inv, cfg);
  httplib::Server server;
  http::mount(server, svc);
  if (!a.ui_dir.empty() && !server.set_mount_point("/", a.ui_dir))
    throw Error(ErrorCode::io_error, "cannot serve UI from " + a.ui_dir);
  std::cerr << "serving " << items.items().size() << " items on " << a.bind << ":" << a.port << " (bank "
            << bank.version() << ", inventory " << inv.version() << ", dispatch seed " << a.seed << ")\n";
  if (a.admin_token.empty()) std::cerr << "warning: no admin token set, export is disabled\n";
  if (!server.listen(a.bind, a.port)) throw Error(ErrorCode::io_error, "cannot bind " + a.bind);
  return 0;
}

// import-discogem -----------------------------------------------------------

struct ImportArgs {
  std::string csv, out_items, out_votes;
  discogem::Layout layout;
  std::string method = "dc";
};

int run_import(ImportArgs a) {
  a.layout.method = parse_method(a.method);
  auto res = discogem::import_csv(text::read_file(a.csv), a.layout);
  text::write_file(a.out_items, res.corpus.serialize_items());
  text::write_file(a.out_votes, res.corpus.serialize_votes());
  std::cerr << "imported " << res.rows << " rows, " << res.votes << " votes\n";
  return 0;
}

void add_rule_flags(CLI::App* cmd, int& min_votes) {
  cmd->add_option("--min-votes", min_votes, "Votes a label needs to survive minority filtering")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discourse-relation crowd annotation toolkit"};
  app.require_subcommand(1);

  DistillArgs distill;
  auto* c = app.add_subcommand("distill", "Per-item sub-labels and distributions from votes");
  c->add_option("--items", distill.items)->required();
  c->add_option("--votes", distill.votes)->required();
  c->add_option("--method", distill.method)->check(CLI::IsMember({"dc", "qa"}))->capture_default_str();
  add_rule_flags(c, distill.min_votes);
  c->add_option("--min-fraction", distill.min_fraction, "Use a vote-share threshold instead of a count");
  c->add_option("--out", distill.out, "JSON-lines output (stdout if omitted)");
  c->callback([&] { std::exit(run_distill(distill)); });

  AgreeArgs agree;
  c = app.add_subcommand("agree", "Inter-annotator agreement between methods or against the reference");
  c->add_option("--items", agree.items)->required();
  c->add_option("--votes-a", agree.votes_a)->required();
  c->add_option("--votes-b", agree.votes_b);
  c->add_option("--method-a", agree.method_a)->capture_default_str();
  c->add_option("--method-b", agree.method_b)->capture_default_str();
  c->add_flag("--reference", agree.reference, "Compare each method with the reference labels");
  c->add_flag("--by-genre", agree.by_genre);
  c->add_option("--seed", agree.seed)->capture_default_str();
  c->add_option("--bootstrap", agree.bootstrap, "Resamples for expected agreement")->capture_default_str();
  c->add_option("--threads", agree.threads, "0 uses all cores");
  add_rule_flags(c, agree.min_votes);
  c->add_option("--min-fraction", agree.min_fraction);
  c->add_option("--log-base", agree.log_base, "2 or e")->capture_default_str();
  c->add_option("--out", agree.out, "JSON report");
  c->callback([&] { std::exit(run_agree(agree)); });

  EntropyArgs ent;
  c = app.add_subcommand("entropy", "Per-genre vote entropy and its correlation with divergence");
  c->add_option("--items", ent.items)->required();
  c->add_option("--votes", ent.votes)->required();
  c->add_option("--method", ent.method)->capture_default_str();
  add_rule_flags(c, ent.min_votes);
  c->add_option("--out", ent.out);
  c->callback([&] { std::exit(run_entropy(ent)); });

  BiasArgs bias;
  c = app.add_subcommand("bias", "Method-bias diagnostics and bias-aware aggregation");
  c->add_option("--items", bias.items)->required();
  c->add_option("--votes", bias.votes)->required();
  c->add_flag("--confusion", bias.confusion);
  c->add_flag("--fpfn", bias.fpfn);
  c->add_flag("--chisq", bias.chisq);
  c->add_flag("--aggregate", bias.aggregate);
  c->add_option("--triggers", bias.triggers, "Senses whose DC presence triggers re-annotation")->capture_default_str();
  c->add_option("--mode", bias.mode)->check(CLI::IsMember({"replace", "merge"}))->capture_default_str();
  c->add_option("--subset", bias.subset, "Restrict aggregation to one genre");
  c->add_option("--pool-floor", bias.pool_floor)->capture_default_str();
  add_rule_flags(c, bias.min_votes);
  c->add_option("--out", bias.out, "JSON tables");
  c->add_option("--plot-data", bias.plot_data, "JSON-lines records for heatmap and bar charts");
  c->callback([&] { std::exit(run_bias(bias)); });

  TrainArgs tr;
  c = app.add_subcommand("train", "Train the hashed n-gram classifier on hard or soft targets");
  c->add_option("--items", tr.items)->required();
  c->add_option("--votes", tr.votes)->required();
  c->add_option("--loss", tr.loss)->check(CLI::IsMember({"hard", "soft"}))->capture_default_str();
  c->add_option("--mix", tr.mix)->check(CLI::IsMember({"dc", "intersection", "union"}))->capture_default_str();
  c->add_option("--seed", tr.cfg.rng_seed)->capture_default_str();
  c->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  c->add_option("--patience", tr.cfg.patience)->capture_default_str();
  c->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
  c->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  c->add_option("--dev-size", tr.cfg.dev_size)->capture_default_str();
  c->add_option("--buckets", tr.features.buckets)->capture_default_str();
  c->add_option("--max-ngram", tr.features.max_ngram)->capture_default_str();
  add_rule_flags(c, tr.min_votes);
  c->add_option("--out", tr.out)->required();
  c->callback([&] { std::exit(run_train(tr)); });

  EvalArgs ev;
  c = app.add_subcommand("eval", "Evaluate a trained model");
  c->add_option("--model", ev.model)->required();
  c->add_option("--test", ev.test, "Items file of the test split")->required();
  c->add_option("--votes", ev.votes)->required();
  c->add_option("--mix", ev.mix)->capture_default_str();
  add_rule_flags(c, ev.min_votes);
  c->callback([&] { std::exit(run_eval(ev)); });

  ServeArgs srv;
  c = app.add_subcommand("serve", "Run the annotation HTTP service");
  c->add_option("--items", srv.items)->required();
  c->add_option("--workers", srv.workers, "Worker registry, one id per line")->required();
  c->add_option("--data-dir", srv.data_dir)->capture_default_str();
  c->add_option("--bank", srv.bank, "Connective bank TSV (built-in if omitted)");
  c->add_option("--inventory", srv.inventory, "QA prefix inventory TSV (built-in if omitted)");
  c->add_option("--bind", srv.bind)->capture_default_str();
  c->add_option("--port", srv.port)->capture_default_str();
  c->add_option("--admin-token", srv.admin_token, "Also read from DISCOREL_ADMIN_TOKEN");
  c->add_option("--seed", srv.seed, "Dispatch shuffle seed")->capture_default_str();
  c->add_option("--batch-size", srv.batch_size)->capture_default_str();
  c->add_option("--ttl-minutes", srv.ttl_minutes)->capture_default_str();
  c->add_option("--ui-dir", srv.ui_dir, "Static files for the browser client");
  c->callback([&] { std::exit(run_serve(srv)); });

  ImportArgs imp;
  c = app.add_subcommand("import-discogem", "Convert a per-worker CSV release into items and votes files");
  c->add_option("--csv", imp.csv)->required();
  c->add_option("--out-items", imp.out_items)->required();
  c->add_option("--out-votes", imp.out_votes)->required();
  c->add_option("--method", imp.method)->capture_default_str();
  c->add_option("--id-column", imp.layout.item_id_column)->capture_default_str();
  c->add_option("--genre-column", imp.layout.genre_column)->capture_default_str();
  c->add_option("--arg1-column", imp.layout.arg1_column)->capture_default_str();
  c->add_option("--arg2-column", imp.layout.arg2_column)->capture_default_str();
  c->add_option("--context-column", imp.layout.context_column);
  c->add_option("--reference-column", imp.layout.reference_column);
  c->add_option("--worker-prefix", imp.layout.worker_column_prefix)->capture_default_str();
  c->callback([&] { std::exit(run_import(imp)); });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.message() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
