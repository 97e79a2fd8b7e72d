import sys

from uqnet.app import UQNetApp

app = UQNetApp.create()
sys.exit(app.run())
