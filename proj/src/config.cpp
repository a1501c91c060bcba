#include <json.hpp>
#include <fstream>
#include <sstream>

#include "tdaug/train/experiment.hpp"

namespace tdaug {

namespace {
using json = nlohmann::json;
}

std::string to_string(AugPolicy policy) {
  switch (policy) {
    case AugPolicy::None: return "none";
    case AugPolicy::Aff: return "Aff";
    case AugPolicy::RD: return "RD";
    case AugPolicy::RI: return "RI";
    case AugPolicy::RDRI: return "RD+RI";
    case AugPolicy::GD: return "GD";
    case AugPolicy::GI: return "GI";
    case AugPolicy::GDGI: return "GD+GI";
    case AugPolicy::Mixup: return "Mixup";
    case AugPolicy::GDGIMixup: return "GD+GI+Mixup";
  }
  return "unknown";
}

AugPolicy policy_from_string(const std::string& name) {
  if (name == "none" || name == "None") return AugPolicy::None;
  if (name == "Aff" || name == "aff") return AugPolicy::Aff;
  if (name == "RD" || name == "rd") return AugPolicy::RD;
  if (name == "RI" || name == "ri") return AugPolicy::RI;
  if (name == "RD+RI" || name == "rd+ri") return AugPolicy::RDRI;
  if (name == "GD" || name == "gd") return AugPolicy::GD;
  if (name == "GI" || name == "gi") return AugPolicy::GI;
  if (name == "GD+GI" || name == "gd+gi") return AugPolicy::GDGI;
  if (name == "Mixup" || name == "mixup") return AugPolicy::Mixup;
  if (name == "GD+GI+Mixup" || name == "gd+gi+mixup") return AugPolicy::GDGIMixup;
  throw std::invalid_argument("unknown augmentation policy: " + name);
}

bool policy_needs_deform_generator(AugPolicy policy) {
  return policy == AugPolicy::GD || policy == AugPolicy::GDGI || policy == AugPolicy::GDGIMixup;
}

bool policy_needs_intensity_generator(AugPolicy policy) {
  return policy == AugPolicy::GI || policy == AugPolicy::GDGI || policy == AugPolicy::GDGIMixup;
}

namespace {

json train_to_json(const TrainConfig& t) {
  return json{{"batch_size", t.batch_size},
              {"total_iters", t.total_iters},
              {"pretrain_iters", t.pretrain_iters},
              {"val_eval_stride", t.val_eval_stride},
              {"lr", t.lr},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"lambda_adv", t.lambda_adv},
              {"lambda_ld", t.lambda_ld},
              {"normalize_ld", t.normalize_ld},
              {"nonsaturating_g", t.nonsaturating_g},
              {"joint", t.joint},
              {"use_validation", t.use_validation},
              {"fixed_iters", t.fixed_iters},
              {"pretrain_affine", t.pretrain_affine},
              {"seed", t.seed},
              {"seg_base_width", t.seg_base_width},
              {"gen",
               {{"z_dim", t.gen.z_dim},
                {"branch_width", t.gen.branch_width},
                {"branch_out", t.gen.branch_out},
                {"common_width", t.gen.common_width},
                {"z_seed_channels", t.gen.z_seed_channels}}},
              {"disc",
               {{"base_width", t.disc.base_width}, {"fc1", t.disc.fc1}, {"fc2", t.disc.fc2}}},
              {"elastic",
               {{"grid_h", t.elastic.grid_h},
                {"grid_w", t.elastic.grid_w},
                {"sigma", t.elastic.sigma}}},
              {"intensity_aug",
               {{"contrast_lo", t.intensity.contrast_lo},
                {"contrast_hi", t.intensity.contrast_hi},
                {"brightness_lo", t.intensity.brightness_lo},
                {"brightness_hi", t.intensity.brightness_hi}}},
              {"mixup_alpha", t.mixup.alpha}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.batch_size = j.value("batch_size", t.batch_size);
  t.total_iters = j.value("total_iters", t.total_iters);
  t.pretrain_iters = j.value("pretrain_iters", t.pretrain_iters);
  t.val_eval_stride = j.value("val_eval_stride", t.val_eval_stride);
  t.lr = j.value("lr", t.lr);
  t.beta1 = j.value("beta1", t.beta1);
  t.beta2 = j.value("beta2", t.beta2);
  t.lambda_adv = j.value("lambda_adv", t.lambda_adv);
  t.lambda_ld = j.value("lambda_ld", t.lambda_ld);
  t.normalize_ld = j.value("normalize_ld", t.normalize_ld);
  t.nonsaturating_g = j.value("nonsaturating_g", t.nonsaturating_g);
  t.joint = j.value("joint", t.joint);
  t.use_validation = j.value("use_validation", t.use_validation);
  t.fixed_iters = j.value("fixed_iters", t.fixed_iters);
  t.pretrain_affine = j.value("pretrain_affine", t.pretrain_affine);
  t.seed = j.value("seed", t.seed);
  t.seg_base_width = j.value("seg_base_width", t.seg_base_width);
  if (j.contains("gen")) {
    const auto& g = j.at("gen");
    t.gen.z_dim = g.value("z_dim", t.gen.z_dim);
    t.gen.branch_width = g.value("branch_width", t.gen.branch_width);
    t.gen.branch_out = g.value("branch_out", t.gen.branch_out);
    t.gen.common_width = g.value("common_width", t.gen.common_width);
    t.gen.z_seed_channels = g.value("z_seed_channels", t.gen.z_seed_channels);
  }
  if (j.contains("disc")) {
    const auto& d = j.at("disc");
    t.disc.base_width = d.value("base_width", t.disc.base_width);
    t.disc.fc1 = d.value("fc1", t.disc.fc1);
    t.disc.fc2 = d.value("fc2", t.disc.fc2);
  }
  if (j.contains("elastic")) {
    const auto& e = j.at("elastic");
    t.elastic.grid_h = e.value("grid_h", t.elastic.grid_h);
    t.elastic.grid_w = e.value("grid_w", t.elastic.grid_w);
    t.elastic.sigma = e.value("sigma", t.elastic.sigma);
  }
  if (j.contains("intensity_aug")) {
    const auto& a = j.at("intensity_aug");
    t.intensity.contrast_lo = a.value("contrast_lo", t.intensity.contrast_lo);
    t.intensity.contrast_hi = a.value("contrast_hi", t.intensity.contrast_hi);
    t.intensity.brightness_lo = a.value("brightness_lo", t.intensity.brightness_lo);
    t.intensity.brightness_hi = a.value("brightness_hi", t.intensity.brightness_hi);
  }
  t.mixup.alpha = j.value("mixup_alpha", t.mixup.alpha);
  return t;
}

json phantom_to_json(const SyntheticPhantomSpec& p) {
  return json{{"image_size", p.image_size},
              {"num_slices", p.num_slices},
              {"num_structures", p.num_structures},
              {"center_jitter", p.center_jitter},
              {"axis_base", p.axis_base},
              {"axis_jitter", p.axis_jitter},
              {"eccentricity", p.eccentricity},
              {"slice_taper", p.slice_taper},
              {"nesting", p.nesting},
              {"class_means", p.class_means},
              {"intensity_jitter", p.intensity_jitter},
              {"gradient_strength", p.gradient_strength},
              {"noise_std", p.noise_std}};
}

SyntheticPhantomSpec phantom_from_json(const json& j) {
  SyntheticPhantomSpec p;
  p.image_size = j.value("image_size", p.image_size);
  p.num_slices = j.value("num_slices", p.num_slices);
  p.num_structures = j.value("num_structures", p.num_structures);
  p.center_jitter = j.value("center_jitter", p.center_jitter);
  p.axis_base = j.value("axis_base", p.axis_base);
  p.axis_jitter = j.value("axis_jitter", p.axis_jitter);
  p.eccentricity = j.value("eccentricity", p.eccentricity);
  p.slice_taper = j.value("slice_taper", p.slice_taper);
  p.nesting = j.value("nesting", p.nesting);
  if (j.contains("class_means")) p.class_means = j.at("class_means").get<std::vector<float>>();
  p.intensity_jitter = j.value("intensity_jitter", p.intensity_jitter);
  p.gradient_strength = j.value("gradient_strength", p.gradient_strength);
  p.noise_std = j.value("noise_std", p.noise_std);
  return p;
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  json j;
  j["train"] = train_to_json(train);
  j["phantom"] = phantom_to_json(phantom);
  j["counts"] = {{"n_unlabeled", counts.n_unlabeled},
                 {"n_test", counts.n_test},
                 {"n_val", counts.n_val}};
  j["n_volumes"] = n_volumes;
  j["n_labeled"] = n_labeled;
  j["replicate"] = replicate;
  j["policy"] = policy;
  j["dataset"] = dataset;
  j["preset"] = preset;
  j["split_seed"] = split_seed;
  j["include_empty_slices"] = include_empty_slices;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig cfg;
  if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
  if (j.contains("phantom")) cfg.phantom = phantom_from_json(j.at("phantom"));
  if (j.contains("counts")) {
    cfg.counts.n_unlabeled = j.at("counts").value("n_unlabeled", cfg.counts.n_unlabeled);
    cfg.counts.n_test = j.at("counts").value("n_test", cfg.counts.n_test);
    cfg.counts.n_val = j.at("counts").value("n_val", cfg.counts.n_val);
  }
  cfg.n_volumes = j.value("n_volumes", cfg.n_volumes);
  cfg.n_labeled = j.value("n_labeled", cfg.n_labeled);
  cfg.replicate = j.value("replicate", cfg.replicate);
  cfg.policy = j.value("policy", cfg.policy);
  cfg.dataset = j.value("dataset", cfg.dataset);
  cfg.preset = j.value("preset", cfg.preset);
  cfg.split_seed = j.value("split_seed", cfg.split_seed);
  cfg.include_empty_slices = j.value("include_empty_slices", cfg.include_empty_slices);
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << to_json() << "\n";
}

std::string ExperimentConfig::config_hash() const {
  const std::string s = to_json();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace tdaug
