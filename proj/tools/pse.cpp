// Command-line entry point: train, probe, eval, export, serve.

#include <csignal>
#include <iostream>
#include <optional>
#include <string>

#include "psevis/pipeline.hpp"
#include "psevis/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

namespace {

httplib::Server* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

template <class T>
void override_with(const std::optional<T>& value, T& target) {
  if (value) target = *value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSTM hidden-state semantics workbench"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> output_dir;
  app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("-o,--output-dir", output_dir, "Directory for model, probes, table and figures");

  // train
  auto* train = app.add_subcommand("train", "Train the LSTM language model");
  std::optional<int> epochs, hidden, layers, bptt;
  std::optional<double> lr, clip;
  std::optional<std::uint64_t> seed;
  bool float32 = false;
  train->add_option("--epochs", epochs);
  train->add_option("--hidden", hidden, "Hidden size N");
  train->add_option("--layers", layers, "Layer count U");
  train->add_option("--bptt", bptt, "Truncated BPTT window");
  train->add_option("--lr", lr, "Initial learning rate");
  train->add_option("--clip", clip, "Gradient norm clip");
  train->add_option("--seed", seed);
  train->add_flag("--float32", float32, "Train in 32-bit floats");

  // probe
  auto* probe = app.add_subcommand("probe", "Train one probe per hidden-state kind");
  std::optional<int> probe_epochs, batch;
  std::optional<double> probe_lr, l2;
  std::optional<std::uint64_t> probe_seed;
  std::optional<unsigned> threads;
  probe->add_option("--epochs", probe_epochs);
  probe->add_option("--lr", probe_lr);
  probe->add_option("--l2", l2);
  probe->add_option("--batch", batch);
  probe->add_option("--seed", probe_seed);
  probe->add_option("--threads", threads, "Parallel probe trainings (0 = all cores)");

  // eval
  auto* eval = app.add_subcommand("eval", "Recompute model and probe perplexities");

  // export
  auto* exp = app.add_subcommand("export", "Render the encoding grid of a sentence as SVG");
  std::string sentence;
  std::optional<std::string> svg_out;
  std::optional<std::size_t> export_k;
  exp->add_option("-s,--sentence", sentence, "Input sentence")->required();
  exp->add_option("--out", svg_out, "SVG path (default <output-dir>/grid.svg)");
  exp->add_option("--k", export_k, "Bars per cell");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve /api/analyze and /api/model");
  std::optional<std::string> host, static_dir;
  std::optional<int> port;
  std::optional<std::size_t> serve_k;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--static-dir", static_dir, "Directory served at /");
  serve->add_option("--k", serve_k, "Default bars per cell");

  CLI11_PARSE(app, argc, argv);

  try {
    psevis::PipelineConfig cfg = config_path.empty() ? psevis::PipelineConfig{}
                                                     : psevis::PipelineConfig::load(config_path);
    if (output_dir) cfg.output_dir = *output_dir;
    override_with(epochs, cfg.model.epochs);
    override_with(hidden, cfg.model.hidden_size);
    override_with(layers, cfg.model.num_layers);
    override_with(bptt, cfg.model.bptt);
    override_with(lr, cfg.model.learning_rate);
    override_with(clip, cfg.model.clip);
    override_with(seed, cfg.model.seed);
    if (float32) cfg.float32 = true;
    override_with(probe_epochs, cfg.probe.epochs);
    override_with(probe_lr, cfg.probe.learning_rate);
    override_with(l2, cfg.probe.l2);
    override_with(batch, cfg.probe.batch_size);
    override_with(probe_seed, cfg.probe.seed);
    override_with(threads, cfg.threads);
    override_with(export_k, cfg.bar_k);
    override_with(serve_k, cfg.bar_k);
    override_with(host, cfg.service.host);
    override_with(port, cfg.service.port);
    if (static_dir) cfg.service.static_dir = *static_dir;
    cfg.service.default_k = cfg.bar_k;
    cfg.service.dominance_fraction = cfg.dominance_fraction;
    cfg.validate();

    std::cerr << "resolved config:\n" << cfg.to_json().dump(2) << "\n";

    if (*train) {
      psevis::run_train(cfg, std::cout);
    } else if (*probe) {
      psevis::run_probe(cfg, std::cout);
    } else if (*eval) {
      psevis::run_eval(cfg, std::cout);
    } else if (*exp) {
      psevis::run_export(cfg, sentence, svg_out ? std::filesystem::path(*svg_out) : cfg.svg_path(), std::cout);
    } else if (*serve) {
      psevis::PseService service(cfg.service);
      service.load(std::make_shared<const psevis::Workbench>(psevis::load_workbench(cfg)));
      httplib::Server server;
      service.mount(server);
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      if (!server.bind_to_port(cfg.service.host, cfg.service.port)) {
        throw std::runtime_error("cannot bind " + cfg.service.host + ":" + std::to_string(cfg.service.port));
      }
      std::cout << "serving on http://" << cfg.service.host << ":" << cfg.service.port << std::endl;
      server.listen_after_bind();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
