#include <fstream>

#include "json.hpp"
#include "sig/sigmodel/model.hpp"

namespace sig::sigmodel {

using json = nlohmann::json;
using numkit::Layer;
using numkit::LayerKind;
using numkit::Matrix;

namespace {

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Affine: return "affine";
    case LayerKind::Relu: return "relu";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Dropout: return "dropout";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& s) {
  if (s == "affine") return LayerKind::Affine;
  if (s == "relu") return LayerKind::Relu;
  if (s == "tanh") return LayerKind::Tanh;
  if (s == "sigmoid") return LayerKind::Sigmoid;
  if (s == "softmax") return LayerKind::Softmax;
  if (s == "batchnorm") return LayerKind::BatchNorm;
  if (s == "dropout") return LayerKind::Dropout;
  throw numkit::ShapeError("checkpoint: unknown layer kind '" + s + "'");
}

json layer_to_json(const Layer& l) {
  json j;
  j["kind"] = kind_name(l.kind);
  switch (l.kind) {
    case LayerKind::Affine:
      j["weight"] = matrix_to_json(l.weight);
      j["bias"] = matrix_to_json(l.bias);
      break;
    case LayerKind::BatchNorm:
      j["gamma"] = matrix_to_json(l.gamma);
      j["beta"] = matrix_to_json(l.beta);
      j["running_mean"] = matrix_to_json(l.bn_state.running_mean);
      j["running_var"] = matrix_to_json(l.bn_state.running_var);
      j["bn_decay"] = l.bn_state.decay;
      j["bn_eps"] = l.bn_state.eps;
      break;
    case LayerKind::Dropout:
      j["dropout_rate"] = l.dropout_rate;
      break;
    default:
      break;
  }
  return j;
}

Layer layer_from_json(const json& j) {
  Layer l;
  l.kind = kind_from_name(j.at("kind").get<std::string>());
  switch (l.kind) {
    case LayerKind::Affine:
      l.weight = matrix_from_json(j.at("weight"));
      l.bias = matrix_from_json(j.at("bias"));
      break;
    case LayerKind::BatchNorm:
      l.gamma = matrix_from_json(j.at("gamma"));
      l.beta = matrix_from_json(j.at("beta"));
      l.bn_state = numkit::BatchNormState(l.gamma.cols, j.at("bn_decay").get<double>(),
                                          j.at("bn_eps").get<double>());
      l.bn_state.running_mean = matrix_from_json(j.at("running_mean"));
      l.bn_state.running_var = matrix_from_json(j.at("running_var"));
      break;
    case LayerKind::Dropout:
      l.dropout_rate = j.at("dropout_rate").get<double>();
      break;
    default:
      break;
  }
  return l;
}

json stack_to_json(const std::vector<Layer>& stack) {
  json arr = json::array();
  for (const Layer& l : stack) arr.push_back(layer_to_json(l));
  return arr;
}

std::vector<Layer> stack_from_json(const json& arr) {
  std::vector<Layer> out;
  for (const json& j : arr) out.push_back(layer_from_json(j));
  return out;
}

json config_to_json(const TrainConfig& c) {
  return json{{"lr", c.lr},
              {"momentum", c.momentum},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"kl_weight", c.kl_weight},
              {"seed", c.seed},
              {"align_block", c.align_block == AlignBlock::Z3 ? "z3" : "z2"},
              {"centroid_decay", c.centroid_decay},
              {"mcc_confusion_enabled", c.mcc_confusion_enabled},
              {"hidden_width", c.hidden_width},
              {"hidden_layers", c.hidden_layers},
              {"clf_hidden", c.clf_hidden},
              {"embed_dim", c.embed_dim},
              {"dropout_rate", c.dropout_rate},
              {"bn_decay", c.bn_decay},
              {"bn_eps", c.bn_eps}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.kl_weight = j.at("kl_weight").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.align_block =
      j.at("align_block").get<std::string>() == "z2" ? AlignBlock::Z2 : AlignBlock::Z3;
  c.centroid_decay = j.at("centroid_decay").get<double>();
  c.mcc_confusion_enabled = j.at("mcc_confusion_enabled").get<bool>();
  c.hidden_width = j.at("hidden_width").get<std::size_t>();
  c.hidden_layers = j.at("hidden_layers").get<std::size_t>();
  c.clf_hidden = j.at("clf_hidden").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.bn_decay = j.at("bn_decay").get<double>();
  c.bn_eps = j.at("bn_eps").get<double>();
  return c;
}

}  // namespace

struct CheckpointCodec {
  static std::string encode(const SigModel& m) {
    json j;
    j["version"] = 1;
    j["input_dim"] = m.input_dim_;
    j["num_domains"] = m.num_domains_;
    j["num_classes"] = m.num_classes_;
    j["partition"] = json{
        {"n1", m.part_.n1}, {"n2", m.part_.n2}, {"n3", m.part_.n3}, {"n4", m.part_.n4}};
    j["config"] = config_to_json(m.cfg_);
    j["encoder"] = stack_to_json(m.enc_stack_);
    j["f_mu"] = layer_to_json(m.f_mu_);
    j["f_logvar"] = layer_to_json(m.f_logvar_);
    j["decoder"] = stack_to_json(m.dec_stack_);
    j["classifier"] = stack_to_json(m.clf_stack_);
    j["embedding"] = matrix_to_json(m.embedding_);
    return j.dump(2);
  }

  static SigModel decode(const std::string& text) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw numkit::ShapeError(std::string("checkpoint parse: ") + e.what());
    }
    if (j.at("version").get<int>() != 1) {
      throw numkit::ShapeError("checkpoint: unsupported version");
    }
    SigModel m;
    m.input_dim_ = j.at("input_dim").get<std::size_t>();
    m.num_domains_ = j.at("num_domains").get<std::size_t>();
    m.num_classes_ = j.at("num_classes").get<std::size_t>();
    const json& p = j.at("partition");
    m.part_ = PartitionDims{p.at("n1").get<std::size_t>(), p.at("n2").get<std::size_t>(),
                            p.at("n3").get<std::size_t>(), p.at("n4").get<std::size_t>()};
    m.cfg_ = config_from_json(j.at("config"));
    m.enc_stack_ = stack_from_json(j.at("encoder"));
    m.f_mu_ = layer_from_json(j.at("f_mu"));
    m.f_logvar_ = layer_from_json(j.at("f_logvar"));
    m.dec_stack_ = stack_from_json(j.at("decoder"));
    m.clf_stack_ = stack_from_json(j.at("classifier"));
    m.embedding_ = matrix_from_json(j.at("embedding"));
    return m;
  }
};

std::string SigModel::to_json() const { return CheckpointCodec::encode(*this); }

SigModel SigModel::from_json(const std::string& text) {
  return CheckpointCodec::decode(text);
}

void SigModel::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw numkit::ShapeError("SigModel::save: cannot open " + path);
  f << to_json() << "\n";
}

SigModel SigModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw numkit::ShapeError("SigModel::load: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace sig::sigmodel
