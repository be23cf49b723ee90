// Command-line entry point. All behavior lives behind the C API so the
// tool itself stays a thin argv forwarder.

#include <ttlab.h>

int main(int argc, char** argv) {
  return ttlab_run_cli(argc - 1, argv + 1);
}
