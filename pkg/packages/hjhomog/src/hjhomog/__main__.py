from hjhomog.cli import main

raise SystemExit(main())
