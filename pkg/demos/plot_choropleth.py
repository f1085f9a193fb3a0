"""
Choropleth maps as plain SVG
============================

Compute region areas on the sphere and draw a risk map without any
plotting library.
"""

import sys
import tempfile
from pathlib import Path

from statevuln import geo, pipeline

cfg = pipeline.fixture_config()
geoms = geo.load_regions(cfg.geojson)

###############################################################################
# Areas come from the spherical excess of each ring; Kano's hole is
# subtracted and Lagos's offshore island is added.
for g in geoms:
    print(f"{g.key:8s} {g.computed_area_km2:10.0f} km2  polygons={len(g.polygons)}")

###############################################################################
# The risk map uses three classes cut at the same ranks as the low/medium/
# high labels; factor maps use five equal intervals.
bundle = pipeline.run_scoring(pipeline.run_ingest(cfg).records, cfg.weights)
layers = pipeline.map_layers(bundle)
spec = geo.default_spec("risk_score", layers["risk_score"])
print("breaks:", [round(b, 4) for b in spec.class_breaks], "colours:", spec.palette)

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
for path in geo.write_maps(geoms, layers, out):
    print("wrote", path)
