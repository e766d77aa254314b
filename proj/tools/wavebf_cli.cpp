// Command-line front end: `run` (single configuration), `table1` (full
// method x setting sweep) and `phantom` (emit the test object only).
//
// Precedence: built-in defaults < config file < WAVEBF_OUTPUT_DIR (output
// directory only) < command-line flags.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "wavebf/wavebf.hpp"

namespace {

using wavebf::ConfigEntries;

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_config_flags(CLI::App& cmd, ConfigFlags& flags) {
  cmd.add_option("-c,--config", flags.config_file, "key = value configuration file");
  for (const auto& key : wavebf::config_keys()) {
    cmd.add_option("--" + key, flags.values[key], "config key " + key);
  }
}

wavebf::ExperimentConfig resolve_config(const CLI::App& cmd, const ConfigFlags& flags) {
  ConfigEntries entries;
  if (!flags.config_file.empty()) {
    std::ifstream in(flags.config_file);
    if (!in) throw wavebf::IoError("cannot open config file '" + flags.config_file + "'");
    entries = wavebf::read_config_entries(in);
  }
  if (const char* env = std::getenv("WAVEBF_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    entries.emplace_back("output_dir", env);
  }
  for (const auto& key : wavebf::config_keys()) {
    if (cmd.count("--" + key) > 0) entries.emplace_back(key, flags.values.at(key));
  }
  return wavebf::parse_config_entries(entries);
}

void print_summary(const std::vector<wavebf::ExperimentOutcome>& outcomes) {
  std::cout << std::left << std::setw(34) << "settings" << std::setw(9) << "method" << std::right
            << std::setw(12) << "rms %" << std::setw(8) << "iters" << '\n';
  for (const auto& o : outcomes) {
    std::cout << std::left << std::setw(34) << o.settings << std::setw(9) << wavebf::method_name(o.method)
              << std::right << std::setw(12) << std::fixed << std::setprecision(3) << o.result.rms_percent
              << std::setw(8) << o.result.iterations_used << (o.result.diverged ? "  (diverged)" : "") << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative initial-data reconstruction for the 1-D wave equation"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  std::string record_out;
  auto* run = app.add_subcommand("run", "Run one method on one configuration");
  add_config_flags(*run, run_flags);
  run->add_option("--record-out", record_out, "also write the observation record CSV here");

  ConfigFlags table_flags;
  std::uint64_t master_seed = 1;
  auto* table = app.add_subcommand("table1", "Run all methods on all comparison settings");
  add_config_flags(*table, table_flags);
  table->add_option("--master-seed", master_seed, "noise seed of the first setting");

  ConfigFlags phantom_flags;
  std::string phantom_out;
  auto* phantom = app.add_subcommand("phantom", "Write the configured phantom as x,value CSV");
  add_config_flags(*phantom, phantom_flags);
  phantom->add_option("-o,--output", phantom_out, "output file (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      wavebf::ExperimentConfig cfg = resolve_config(*run, run_flags);
      if (cfg.output_dir.empty()) cfg.output_dir = "results";
      const auto outcome = wavebf::run_experiment(cfg);
      if (!record_out.empty()) {
        std::ofstream out(record_out, std::ios::binary);
        if (!out) throw wavebf::IoError("cannot write '" + record_out + "'");
        wavebf::write_record_csv(out, wavebf::make_problem(cfg).record);
      }
      print_summary({outcome});
      std::cout << "artifacts written to " << cfg.output_dir.string() << '\n';
    } else if (table->parsed()) {
      wavebf::ExperimentConfig cfg = resolve_config(*table, table_flags);
      if (cfg.output_dir.empty()) cfg.output_dir = "results/table1";
      const auto outcomes = wavebf::run_table1(cfg, master_seed);
      wavebf::emit_results(outcomes, cfg.output_dir);
      print_summary(outcomes);
      std::cout << "artifacts written to " << cfg.output_dir.string() << '\n';
    } else if (phantom->parsed()) {
      const wavebf::ExperimentConfig cfg = resolve_config(*phantom, phantom_flags);
      const wavebf::Phantom p = wavebf::generate_phantom(cfg.phantom, cfg.grid);
      std::ofstream file;
      if (!phantom_out.empty()) {
        file.open(phantom_out, std::ios::binary);
        if (!file) throw wavebf::IoError("cannot write '" + phantom_out + "'");
      }
      std::ostream& out = phantom_out.empty() ? std::cout : file;
      out << "x,value\n";
      for (int i = 0; i < cfg.grid.n_interior; ++i) {
        out << wavebf::format_real(cfg.grid.node(i)) << ',' << wavebf::format_real(p.values(i)) << '\n';
      }
    }
  } catch (const wavebf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
