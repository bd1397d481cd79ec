#include "chatgnn/cli.hpp"

int main(int argc, char** argv) { return chatgnn::cli::run(argc, argv); }
