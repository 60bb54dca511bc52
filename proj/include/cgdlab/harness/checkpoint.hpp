#pragma once

// Versioned text checkpoints of optimizer state plus named RNG streams.
// Doubles are stored as C hex-float literals (bit-exact round trip); engine
// states use the standard stream representation. The freeze experiment
// depends on both branches resuming from byte-identical state.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgdlab/optimizers.hpp"

namespace cgdlab::harness {

inline constexpr const char* kCheckpointMagic = "cgdlab-checkpoint-v1";

struct Checkpoint {
  optimizers::OptimizerState state;
  std::map<std::string, std::mt19937_64> streams;
};

namespace detail {

inline std::string hex_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", d);
  return buf;
}

inline double parse_hex_double(const std::string& tok, const std::string& path) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  double d = std::strtod(begin, &end);
  if (end != begin + tok.size()) {
    throw std::runtime_error("checkpoint: bad float token '" + tok + "' in " + path);
  }
  return d;
}

inline void write_vector(std::ostream& out, const char* name, const std::vector<double>& v) {
  out << "vec " << name << ' ' << v.size();
  for (double d : v) out << ' ' << hex_double(d);
  out << '\n';
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out << kCheckpointMagic << '\n';
  out << "t " << ckpt.state.t << '\n';
  out << "tx " << ckpt.state.tx << '\n';
  out << "ty " << ckpt.state.ty << '\n';
  out << "diverged " << (ckpt.state.diverged ? 1 : 0) << '\n';
  detail::write_vector(out, "x", ckpt.state.x);
  detail::write_vector(out, "y", ckpt.state.y);
  detail::write_vector(out, "vx", ckpt.state.vx);
  detail::write_vector(out, "vy", ckpt.state.vy);
  detail::write_vector(out, "mx", ckpt.state.mx);
  detail::write_vector(out, "my", ckpt.state.my);
  for (const auto& [name, engine] : ckpt.streams) {
    out << "rng " << name << ' ' << engine << '\n';
  }
  out << "end\n";
  out.flush();
  if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  std::string magic;
  if (!std::getline(in, magic) || magic != kCheckpointMagic) {
    throw std::runtime_error("checkpoint: '" + path + "' is not a recognized checkpoint (format '" +
                             magic + "')");
  }
  Checkpoint ckpt;
  std::string line;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end") {
      saw_end = true;
      break;
    }
    if (key == "t") ls >> ckpt.state.t;
    else if (key == "tx") ls >> ckpt.state.tx;
    else if (key == "ty") ls >> ckpt.state.ty;
    else if (key == "diverged") {
      int d = 0;
      ls >> d;
      ckpt.state.diverged = d != 0;
    } else if (key == "vec") {
      std::string name;
      std::size_t n = 0;
      ls >> name >> n;
      std::vector<double> v;
      v.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::string tok;
        if (!(ls >> tok)) throw std::runtime_error("checkpoint: truncated vector in " + path);
        v.push_back(detail::parse_hex_double(tok, path));
      }
      if (name == "x") ckpt.state.x = std::move(v);
      else if (name == "y") ckpt.state.y = std::move(v);
      else if (name == "vx") ckpt.state.vx = std::move(v);
      else if (name == "vy") ckpt.state.vy = std::move(v);
      else if (name == "mx") ckpt.state.mx = std::move(v);
      else if (name == "my") ckpt.state.my = std::move(v);
      else throw std::runtime_error("checkpoint: unknown vector '" + name + "' in " + path);
    } else if (key == "rng") {
      std::string name;
      ls >> name;
      std::mt19937_64 engine;
      ls >> engine;
      if (!ls) throw std::runtime_error("checkpoint: bad rng state for '" + name + "' in " + path);
      ckpt.streams[name] = engine;
    } else {
      throw std::runtime_error("checkpoint: unknown record '" + key + "' in " + path);
    }
    if (ls.fail()) throw std::runtime_error("checkpoint: malformed line in " + path);
  }
  if (!saw_end) throw std::runtime_error("checkpoint: missing end marker in " + path);
  return ckpt;
}

}  // namespace cgdlab::harness
