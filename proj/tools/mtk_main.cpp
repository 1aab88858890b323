// mtk command line: corpus generation, two-stage training, generation,
// evaluation and the latency benchmark. Subcommands are thin orchestration
// over the library; every run writes its resolved configuration beside its
// outputs. Exit codes: 0 ok, 2 usage, 3 data error, 4 checkpoint error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mtk/bench.hpp"
#include "mtk/checkpoint.hpp"
#include "mtk/corpus.hpp"
#include "mtk/metrics.hpp"
#include "mtk/synthesis.hpp"
#include "mtk/vq.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mtk;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckpoint = 4;

struct CliState {
  std::string config_path;
  uint64_t seed_flag = 0;
  bool seed_set = false;
};

uint64_t resolve_seed(const CliState& cli, const config::Map& cfg) {
  if (cli.seed_set) return cli.seed_flag;
  if (cfg.count("seed")) return config::get_u64(cfg, "seed", 1);
  if (const char* env = std::getenv("MTALK_SEED")) return std::strtoull(env, nullptr, 10);
  return 1;
}

config::Map load_config(const CliState& cli) {
  return cli.config_path.empty() ? config::Map{} : config::parse_file(cli.config_path);
}

void write_run_config(const fs::path& dir, const std::string& command,
                      config::Map resolved) {
  resolved["command"] = command;
  fs::create_directories(dir);
  config::write_file((dir / "run_config.cfg").string(), resolved);
}

vq::VqConfig vq_config_from(const config::Map& m, uint64_t seed) {
  vq::VqConfig cfg;
  cfg.codebook_size = config::get_int(m, "vq_codebook", cfg.codebook_size);
  cfg.latent_channels = config::get_int(m, "vq_latent", cfg.latent_channels);
  cfg.hidden = config::get_int(m, "vq_hidden", cfg.hidden);
  cfg.epochs = config::get_int(m, "vq_epochs", cfg.epochs);
  cfg.lr = config::get_double(m, "lr", cfg.lr);
  cfg.lr_final = config::get_double(m, "lr_final", cfg.lr_final);
  cfg.window = config::get_int(m, "vq_window", cfg.window);
  cfg.batch = config::get_int(m, "vq_batch", cfg.batch);
  cfg.windows_per_epoch = config::get_int(m, "vq_windows_per_epoch", cfg.windows_per_epoch);
  cfg.vel_acc_terms = config::get_int(m, "vq_vel_acc", 1) != 0;
  cfg.seed = seed;
  return cfg;
}

config::Map vq_config_to_map(const vq::VqConfig& cfg) {
  config::Map m;
  m["vq_codebook"] = std::to_string(cfg.codebook_size);
  m["vq_latent"] = std::to_string(cfg.latent_channels);
  m["vq_hidden"] = std::to_string(cfg.hidden);
  m["vq_epochs"] = std::to_string(cfg.epochs);
  m["lr"] = std::to_string(cfg.lr);
  m["lr_final"] = std::to_string(cfg.lr_final);
  m["vq_window"] = std::to_string(cfg.window);
  m["vq_batch"] = std::to_string(cfg.batch);
  m["vq_windows_per_epoch"] = std::to_string(cfg.windows_per_epoch);
  m["vq_vel_acc"] = cfg.vel_acc_terms ? "1" : "0";
  m["seed"] = std::to_string(cfg.seed);
  return m;
}

synth::GeneratorConfig gen_config_from(const config::Map& m,
                                       const corpus::CorpusSpec& spec, uint64_t seed) {
  synth::GeneratorConfig cfg;
  cfg.model_dim = config::get_int(m, "model_dim", cfg.model_dim);
  cfg.heads = config::get_int(m, "heads", cfg.heads);
  cfg.ssm_dim = config::get_int(m, "ssm_dim", cfg.ssm_dim);
  cfg.ssm_state = config::get_int(m, "ssm_state", cfg.ssm_state);
  cfg.text_embed = config::get_int(m, "text_embed", cfg.text_embed);
  cfg.frames = spec.frames();
  if (cfg.frames % vq::kDownsample != 0)
    throw std::invalid_argument("corpus clip frames must be divisible by 4");
  cfg.latent_len = cfg.frames / vq::kDownsample;
  cfg.vocab = spec.vocab;
  cfg.speakers = spec.speakers;
  cfg.fps = spec.fps;
  cfg.mask_ratio = config::get_double(m, "mask_ratio", cfg.mask_ratio);
  cfg.epochs = config::get_int(m, "gen_epochs", cfg.epochs);
  cfg.lr = config::get_double(m, "lr", cfg.lr);
  const char* part_names[4] = {"face", "upper", "hands", "lower"};
  for (size_t p = 0; p < 4; ++p) {
    cfg.alpha[p] = config::get_double(m, std::string("alpha_") + part_names[p], cfg.alpha[p]);
    cfg.beta[p] = config::get_double(m, std::string("beta_") + part_names[p], cfg.beta[p]);
  }
  cfg.seed = seed;
  return cfg;
}

config::Map gen_config_to_map(const synth::GeneratorConfig& cfg) {
  config::Map m;
  m["model_dim"] = std::to_string(cfg.model_dim);
  m["heads"] = std::to_string(cfg.heads);
  m["ssm_dim"] = std::to_string(cfg.ssm_dim);
  m["ssm_state"] = std::to_string(cfg.ssm_state);
  m["text_embed"] = std::to_string(cfg.text_embed);
  m["mask_ratio"] = std::to_string(cfg.mask_ratio);
  m["gen_epochs"] = std::to_string(cfg.epochs);
  m["lr"] = std::to_string(cfg.lr);
  const char* part_names[4] = {"face", "upper", "hands", "lower"};
  for (size_t p = 0; p < 4; ++p) {
    m[std::string("alpha_") + part_names[p]] = std::to_string(cfg.alpha[p]);
    m[std::string("beta_") + part_names[p]] = std::to_string(cfg.beta[p]);
  }
  m["seed"] = std::to_string(cfg.seed);
  return m;
}

std::array<vq::VqVae, 4> load_vq_models(const fs::path& dir) {
  auto load_one = [&](motion::BodyPart part) {
    fs::path path = dir / (std::string(motion::part_name(part)) + ".mtvq");
    auto model = vq::VqVae::load(path.string());
    if (model.part() != part)
      throw IoError(IoErrorKind::bad_data, path.string(), "file holds a different part");
    return model;
  };
  return {load_one(motion::BodyPart::face), load_one(motion::BodyPart::upper),
          load_one(motion::BodyPart::hands), load_one(motion::BodyPart::lower)};
}

std::vector<motion::MotionSequence> motions_of(const std::vector<corpus::Clip>& clips) {
  std::vector<motion::MotionSequence> out;
  out.reserve(clips.size());
  for (const auto& c : clips) out.push_back(c.motion);
  return out;
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string(), "cannot write report");
  out << header << "\n";
  for (const auto& r : rows) out << r << "\n";
}

// --- subcommand bodies -------------------------------------------------------

int cmd_gen_corpus(const CliState& cli, const std::string& spec_path,
                   const std::string& out) {
  config::Map cfg = spec_path.empty() ? config::Map{} : config::parse_file(spec_path);
  corpus::CorpusSpec spec = corpus::CorpusSpec::from_config(cfg);
  spec.seed = resolve_seed(cli, cfg);
  corpus::generate_corpus(spec, out);
  auto counts = corpus::split_counts(spec.total_clips());
  std::cout << "corpus: " << spec.total_clips() << " clips (" << counts.train
            << " train / " << counts.val << " val / " << counts.test << " test) -> "
            << out << "\n";
  return kExitOk;
}

int cmd_train_vqvae(const CliState& cli, const std::string& corpus_dir,
                    const std::string& part_name, const std::string& out) {
  config::Map file_cfg = load_config(cli);
  uint64_t seed = resolve_seed(cli, file_cfg);
  auto part = motion::part_from_name(part_name);
  vq::VqConfig cfg = vq_config_from(file_cfg, seed);
  auto clips = corpus::load_split(corpus_dir, corpus::Split::train);
  auto result = vq::train_vqvae(motions_of(clips), part, cfg);

  fs::create_directories(out);
  result.model.save((fs::path(out) / (part_name + ".mtvq")).string());
  std::vector<std::string> rows;
  for (size_t e = 0; e < result.curve.size(); ++e)
    rows.push_back(std::to_string(e) + "," + std::to_string(result.curve[e].loss) + "," +
                   std::to_string(result.curve[e].rec) + "," +
                   std::to_string(result.curve[e].utilization));
  write_csv(fs::path(out) / (part_name + "_curve.csv"), "epoch,loss,rec,utilization", rows);
  write_run_config(out, "train-vqvae " + part_name, vq_config_to_map(cfg));
  std::cout << "part " << part_name << ": loss " << result.curve.front().loss << " -> "
            << result.curve.back().loss << ", codebook utilization "
            << result.curve.back().utilization << "\n";
  return kExitOk;
}

int cmd_train_gen(const CliState& cli, const std::string& corpus_dir,
                  const std::string& vq_dir, const std::string& out) {
  config::Map file_cfg = load_config(cli);
  uint64_t seed = resolve_seed(cli, file_cfg);
  auto spec = corpus::read_spec(corpus_dir);
  synth::GeneratorConfig cfg = gen_config_from(file_cfg, spec, seed);
  auto vqs = load_vq_models(vq_dir);
  auto clips = corpus::load_split(corpus_dir, corpus::Split::train);
  auto result = synth::train_stage2(clips, vqs, cfg);

  fs::create_directories(out);
  result.model.save((fs::path(out) / "generator.mtg2").string());
  for (motion::BodyPart p : motion::kAllParts) {
    fs::path src = fs::path(vq_dir) / (std::string(motion::part_name(p)) + ".mtvq");
    fs::path dst = fs::path(out) / (std::string(motion::part_name(p)) + ".mtvq");
    if (!fs::equivalent(src.parent_path(), fs::path(out)))
      fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
  }
  std::vector<std::string> rows;
  for (size_t e = 0; e < result.curve.size(); ++e) {
    const auto& s = result.curve[e];
    rows.push_back(std::to_string(e) + "," + std::to_string(s.loss) + "," +
                   std::to_string(s.accuracy[0]) + "," + std::to_string(s.accuracy[1]) +
                   "," + std::to_string(s.accuracy[2]) + "," +
                   std::to_string(s.accuracy[3]));
  }
  write_csv(fs::path(out) / "gen_curve.csv",
            "epoch,loss,acc_face,acc_upper,acc_hands,acc_lower", rows);
  write_run_config(out, "train-gen", gen_config_to_map(cfg));

  auto held = synth::evaluate_stage2(result.model, vqs, corpus::load_split(corpus_dir, corpus::Split::val));
  std::cout << "stage-2: loss " << result.curve.back().loss << ", val accuracy"
            << " upper " << held.accuracy[1] << " hands " << held.accuracy[2]
            << " lower " << held.accuracy[3] << "\n";
  return kExitOk;
}

int cmd_generate(const CliState&, const std::string& models_dir,
                 const std::string& audio_path, const std::string& tokens_path,
                 int64_t speaker, const std::string& out,
                 const std::string& corpus_dir, const std::string& split_name_arg,
                 const std::string& seed_pose_path) {
  auto vqs = load_vq_models(models_dir);
  auto gen = synth::Generator::load((fs::path(models_dir) / "generator.mtg2").string());

  if (!corpus_dir.empty()) {
    corpus::Split split = corpus::Split::test;
    if (split_name_arg == "train") split = corpus::Split::train;
    else if (split_name_arg == "val") split = corpus::Split::val;
    else if (split_name_arg != "test")
      throw std::invalid_argument("unknown split \"" + split_name_arg + "\"");
    auto clips = corpus::load_split(corpus_dir, split);
    fs::create_directories(out);
    std::vector<std::string> rows;
    for (const auto& clip : clips) {
      synth::GenerationTiming tm;
      auto m = synth::generate(gen, vqs, clip.audio, clip.tokens, clip.speaker, &tm);
      motion::write_motion(
          (fs::path(out) / ("clip_" + std::to_string(clip.id) + ".mtmo")).string(), m);
      rows.push_back(std::to_string(clip.id) + "," + std::to_string(tm.total_s));
    }
    write_csv(fs::path(out) / "timing.csv", "clip,total_s", rows);
    config::Map resolved;
    resolved["models"] = models_dir;
    resolved["corpus"] = corpus_dir;
    resolved["split"] = split_name_arg;
    write_run_config(out, "generate", resolved);
    std::cout << "generated " << clips.size() << " clips -> " << out << "\n";
    return kExitOk;
  }

  if (audio_path.empty() || tokens_path.empty())
    throw std::invalid_argument("generate needs --audio and --tokens (or --corpus)");
  auto audio = corpus::read_audio(audio_path);
  auto tokens = corpus::read_tokens(tokens_path);
  motion::MotionSequence seed_pose;
  bool have_seed_pose = !seed_pose_path.empty();
  if (have_seed_pose) seed_pose = motion::read_motion(seed_pose_path);
  synth::GenerationTiming tm;
  auto m = synth::generate(gen, vqs, audio.samples, tokens, speaker, &tm,
                           have_seed_pose ? &seed_pose : nullptr);
  motion::write_motion(out, m);
  // timing lives in a sibling file so motion outputs stay bit-comparable
  std::vector<std::string> rows = {
      "audio," + std::to_string(tm.audio_s),
      "text," + std::to_string(tm.text_s),
      "global_scan," + std::to_string(tm.global_s),
      "local_scan," + std::to_string(tm.local_s),
      "decode_face," + std::to_string(tm.decode_s[0]),
      "decode_upper," + std::to_string(tm.decode_s[1]),
      "decode_hands," + std::to_string(tm.decode_s[2]),
      "decode_lower," + std::to_string(tm.decode_s[3]),
      "total," + std::to_string(tm.total_s)};
  write_csv(fs::path(out).string() + ".timing.csv", "stage,seconds", rows);
  std::cout << "generated " << m.frames << " frames -> " << out << " ("
            << tm.total_s << " s)\n";
  return kExitOk;
}

int cmd_evaluate(const CliState& cli, const std::string& corpus_dir,
                 const std::string& generated_dir, const std::string& report,
                 double bc_sigma, int64_t fgd_epochs) {
  config::Map file_cfg = load_config(cli);
  uint64_t seed = resolve_seed(cli, file_cfg);

  auto test_clips = corpus::load_split(corpus_dir, corpus::Split::test);
  if (test_clips.empty()) throw std::invalid_argument("empty test split");

  // generated clips match test ids; the directory may be corpus-shaped
  fs::path gen_dir = fs::path(generated_dir);
  if (fs::exists(gen_dir / "test")) gen_dir /= "test";
  std::vector<motion::MotionSequence> generated;
  for (const auto& clip : test_clips) {
    fs::path p = gen_dir / ("clip_" + std::to_string(clip.id) + ".mtmo");
    generated.push_back(motion::read_motion(p.string()));
  }

  // FGD features from an autoencoder fit on the train split
  metrics::FeatureConfig fcfg;
  fcfg.seed = seed;
  fcfg.epochs = fgd_epochs;
  auto train_clips = corpus::load_split(corpus_dir, corpus::Split::train);
  auto extractor = metrics::train_feature_extractor(motions_of(train_clips), fcfg);

  std::vector<std::vector<double>> real_feats, gen_feats;
  for (const auto& clip : test_clips)
    real_feats.push_back(extractor.model.features(clip.motion));
  for (const auto& m : generated) gen_feats.push_back(extractor.model.features(m));

  double fgd_value = metrics::fgd(real_feats, gen_feats);
  double diversity_value = generated.size() >= 2 ? metrics::diversity(generated) : 0.0;
  double bc_sum = 0.0, mse_sum = 0.0, lvd_sum = 0.0;
  for (size_t i = 0; i < generated.size(); ++i) {
    auto mb = metrics::motion_beats(generated[i]);
    auto ab = metrics::audio_beats(test_clips[i].audio, test_clips[i].audio_rate);
    bc_sum += metrics::beat_constancy(mb, ab, bc_sigma);
    mse_sum += metrics::vertex_mse(test_clips[i].motion, generated[i]);
    lvd_sum += metrics::lvd(test_clips[i].motion, generated[i]);
  }
  double n = double(generated.size());

  config::Map resolved;
  resolved["corpus"] = corpus_dir;
  resolved["generated"] = generated_dir;
  resolved["seed"] = std::to_string(seed);
  resolved["bc_sigma"] = std::to_string(bc_sigma);
  resolved["fgd_epochs"] = std::to_string(fgd_epochs);
  uint64_t hash = config::digest(resolved);
  std::string hash_str = std::to_string(hash);

  std::vector<std::pair<std::string, double>> values = {
      {"fgd", fgd_value},
      {"diversity", diversity_value},
      {"bc", bc_sum / n},
      {"mse", mse_sum / n},
      {"lvd", lvd_sum / n},
      {"fgd_extractor_recon_l1", extractor.recon_l1},
  };
  std::vector<std::string> rows;
  json j;
  for (const auto& [name, value] : values) {
    std::ostringstream os;
    os.precision(17);
    os << name << "," << value << "," << hash_str;
    rows.push_back(os.str());
    j[name] = value;
  }
  j["config_hash"] = hash_str;
  fs::path csv_path(report);
  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  write_csv(csv_path, "metric,value,config-hash", rows);
  std::ofstream(report + ".json") << j.dump(2) << "\n";
  write_run_config(csv_path.has_parent_path() ? csv_path.parent_path() : fs::path("."),
                   "evaluate", resolved);
  for (const auto& [name, value] : values) std::cout << name << " = " << value << "\n";
  return kExitOk;
}

int cmd_bench(const CliState& cli, const std::string& models_dir,
              const std::string& lengths_csv, int64_t repeats,
              const std::string& report) {
  config::Map file_cfg = load_config(cli);
  uint64_t seed = resolve_seed(cli, file_cfg);

  std::vector<int64_t> lengths;
  {
    std::stringstream ss(lengths_csv);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) lengths.push_back(std::stoll(item));
  }
  if (lengths.empty()) throw std::invalid_argument("no lengths given");

  auto scaling = bench::scaling_report(lengths, repeats, seed);

  auto vqs = load_vq_models(models_dir);
  auto gen = synth::Generator::load((fs::path(models_dir) / "generator.mtg2").string());
  // deterministic synthetic input: the benchmark measures time, not content
  Rng rng(seed);
  std::vector<double> audio(static_cast<size_t>(gen.config().frames * 534));
  for (auto& v : audio) v = 0.2 * rng.uniform(-1, 1);
  std::vector<int64_t> tokens(static_cast<size_t>(gen.config().frames));
  for (auto& t : tokens) t = int64_t(rng.below(uint64_t(gen.config().vocab)));
  auto modules = bench::module_report(gen, vqs, audio, tokens, 0, repeats);

  fs::path prefix(report);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  std::vector<std::string> rows;
  for (const auto& r : scaling.scan)
    rows.push_back("scan," + std::to_string(r.length) + "," + std::to_string(r.mean_s) +
                   "," + std::to_string(r.std_s));
  for (const auto& r : scaling.attention)
    rows.push_back("attention," + std::to_string(r.length) + "," +
                   std::to_string(r.mean_s) + "," + std::to_string(r.std_s));
  write_csv(prefix.string() + "_scaling.csv", "kind,length,mean_s,std_s", rows);

  rows.clear();
  for (const auto& r : modules)
    rows.push_back(r.name + "," + std::to_string(r.mean_s) + "," +
                   std::to_string(r.std_s));
  write_csv(prefix.string() + "_modules.csv", "module,mean_s_per_s,std_s_per_s", rows);

  json j;
  j["scan_r2_linear"] = scaling.scan_r2_linear;
  j["scan_r2_quadratic"] = scaling.scan_r2_quadratic;
  j["attention_r2_linear"] = scaling.attn_r2_linear;
  j["attention_r2_quadratic"] = scaling.attn_r2_quadratic;
  for (const auto& r : modules) j["modules"][r.name] = {r.mean_s, r.std_s};
  std::ofstream(prefix.string() + ".json") << j.dump(2) << "\n";

  std::cout << "scan R^2: linear " << scaling.scan_r2_linear << ", quadratic "
            << scaling.scan_r2_quadratic << "\n";
  std::cout << "attention R^2: linear " << scaling.attn_r2_linear << ", quadratic "
            << scaling.attn_r2_quadratic << "\n";
  for (const auto& r : modules)
    std::cout << r.name << ": " << r.mean_s << " +/- " << r.std_s << " s per second\n";
  return kExitOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"speech-driven gesture synthesis with selective state-space models"};
  app.require_subcommand(1);
  app.fallthrough();  // --config/--seed may follow the subcommand
  CliState cli;
  app.add_option("--config", cli.config_path, "key=value configuration file");
  auto* seed_opt = app.add_option("--seed", cli.seed_flag, "seed override");

  std::string spec_path, out, corpus_dir, part, vq_dir, models_dir;
  std::string audio_path, tokens_path, generated_dir, report, lengths, split = "test";
  std::string seed_pose_path;
  int64_t speaker = 0, repeats = 5, fgd_epochs = 6;
  double bc_sigma = 0.1;

  auto* gen_corpus = app.add_subcommand("gen-corpus", "synthesize a paired corpus");
  gen_corpus->add_option("--spec", spec_path, "corpus spec config");
  gen_corpus->add_option("--out", out, "output directory")->required();

  auto* train_vq = app.add_subcommand("train-vqvae", "train one part's motion autoencoder");
  train_vq->add_option("--corpus", corpus_dir, "corpus directory")->required();
  train_vq->add_option("--part", part, "face|upper|hands|lower")->required();
  train_vq->add_option("--out", out, "output directory")->required();

  auto* train_gen = app.add_subcommand("train-gen", "train the speech-to-gesture generator");
  train_gen->add_option("--corpus", corpus_dir, "corpus directory")->required();
  train_gen->add_option("--vq-dir", vq_dir, "directory with part checkpoints")->required();
  train_gen->add_option("--out", out, "output directory")->required();

  auto* generate = app.add_subcommand("generate", "synthesize motion from speech");
  generate->add_option("--models", models_dir, "model directory")->required();
  generate->add_option("--audio", audio_path, "MTAU audio file");
  generate->add_option("--tokens", tokens_path, "token id file");
  generate->add_option("--speaker", speaker, "speaker index");
  generate->add_option("--out", out, "output .mtmo file or directory")->required();
  generate->add_option("--corpus", corpus_dir, "bulk mode: generate for a corpus split");
  generate->add_option("--split", split, "corpus split for bulk mode (default test)");
  generate->add_option("--seed-pose", seed_pose_path,
                       "motion file whose first 4 frames condition the opening");

  auto* evaluate = app.add_subcommand("evaluate", "score generated motion against a corpus");
  evaluate->add_option("--corpus", corpus_dir, "corpus directory")->required();
  evaluate->add_option("--generated", generated_dir, "generated clip directory")->required();
  evaluate->add_option("--report", report, "CSV report path")->required();
  evaluate->add_option("--bc-sigma", bc_sigma, "beat constancy kernel width (s)");
  evaluate->add_option("--fgd-epochs", fgd_epochs, "feature extractor epochs");

  auto* bench_cmd = app.add_subcommand("bench", "latency benchmark");
  bench_cmd->add_option("--models", models_dir, "model directory")->required();
  bench_cmd->add_option("--lengths", lengths, "comma-separated sequence lengths")
      ->default_val("256,512,1024,2048,4096,8192");
  bench_cmd->add_option("--repeats", repeats, "timing repeats per point");
  bench_cmd->add_option("--report", report, "report path prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  cli.seed_set = seed_opt->count() > 0;

  try {
    if (gen_corpus->parsed()) return cmd_gen_corpus(cli, spec_path, out);
    if (train_vq->parsed()) return cmd_train_vqvae(cli, corpus_dir, part, out);
    if (train_gen->parsed()) return cmd_train_gen(cli, corpus_dir, vq_dir, out);
    if (generate->parsed())
      return cmd_generate(cli, models_dir, audio_path, tokens_path, speaker, out,
                          corpus_dir, split, seed_pose_path);
    if (evaluate->parsed())
      return cmd_evaluate(cli, corpus_dir, generated_dir, report, bc_sigma, fgd_epochs);
    if (bench_cmd->parsed()) return cmd_bench(cli, models_dir, lengths, repeats, report);
  } catch (const IoError& e) {
    std::string p = e.path();
    bool checkpoint = p.size() > 5 && (p.ends_with(".mtvq") || p.ends_with(".mtg2"));
    std::cerr << "error: " << e.what() << "\n";
    return checkpoint ? kExitCheckpoint : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) { return dispatch(argc, argv); }
