from permcolor.cli import main

main()
