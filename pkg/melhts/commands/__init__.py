from melhts.commands import align, evaluate, extract, heq, invert, segment, synth, train

# Registration order is the order `--help` lists the subcommands in.
COMMAND_MODULES = (extract, segment, train, align, synth, heq, invert, evaluate)
