from tga.cli import main

main()
