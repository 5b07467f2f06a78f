from lightcone.main import program

program.run()
