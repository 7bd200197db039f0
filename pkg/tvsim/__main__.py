from tvsim.cli import main

raise SystemExit(main())
