import sys

from fim_sandbox.runner import main

if __name__ == "__main__":
    sys.exit(main())
