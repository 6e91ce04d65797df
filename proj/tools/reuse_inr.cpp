// SPDX-License-Identifier: Apache-2.0
#include "reuse_inr/harness.hpp"

int main(int argc, char** argv) { return reuse_inr::run_cli(argc, argv); }
