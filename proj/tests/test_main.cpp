#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"
#include "ssflab/spectral.hpp"

int main(int argc, char** argv) {
  ssflab::relaunch_with_portable_blas(argv);
  doctest::Context context(argc, argv);
  return context.run();
}
