from pathlib import Path

import mahedkit

FIXTURES = Path(mahedkit.__file__).parent / "data" / "fixtures"
