// SPDX-License-Identifier: Apache-2.0
#include "hopformer/cli.hpp"

int main(int argc, char** argv) { return hopformer::run_cli(argc, argv); }
