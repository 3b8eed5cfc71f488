// Command-line entry point. Exit codes: 0 ok, 1 usage error, 2 runtime error.
#include <iostream>

#include "aquanet/errors.hpp"
#include "cli_common.hpp"

namespace aquanet::cli {
int &gradcheck_exit_code();
}

int main(int argc, char **argv) {
  using namespace aquanet::cli;
  CLI::App app{"AQUANet segmentation, dataset analysis and texture benchmark tools", "aquanet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");
  const std::vector<std::string> args(argv, argv + argc);
  const auto handlers = register_all(app, args);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    for (const auto &[sub, run] : handlers) {
      if (sub->parsed()) run();
    }
  } catch (const aquanet::Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return gradcheck_exit_code();
}
